/**
 * Binary PGM (P5) / PPM (P6) decoding, maxval 255 only.
 */

export interface Raster {
  width: number;
  height: number;
  channels: 1 | 3;
  /** Row-major, channel-interleaved samples. */
  data: Uint8Array;
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0b || byte === 0x0c;
}

/** Skip whitespace and '#' comments; return the next token and end offset. */
function token(buf: Buffer, pos: number): { text: string; end: number } {
  while (pos < buf.length) {
    if (isSpace(buf[pos])) {
      pos += 1;
    } else if (buf[pos] === 0x23 /* '#' */) {
      while (pos < buf.length && buf[pos] !== 0x0a && buf[pos] !== 0x0d) pos += 1;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < buf.length && !isSpace(buf[pos])) pos += 1;
  if (start === pos) throw new Error(`unexpected end of header at byte ${pos}`);
  return { text: buf.toString('ascii', start, pos), end: pos };
}

export function decodePnm(buf: Buffer): Raster {
  const magic = token(buf, 0);
  if (magic.text !== 'P5' && magic.text !== 'P6') {
    throw new Error(`unsupported magic ${JSON.stringify(magic.text)}`);
  }
  const channels = magic.text === 'P5' ? 1 : 3;
  const w = token(buf, magic.end);
  const h = token(buf, w.end);
  const maxval = token(buf, h.end);
  const width = Number(w.text);
  const height = Number(h.text);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    throw new Error(`bad dimensions ${w.text}x${h.text}`);
  }
  if (maxval.text !== '255') throw new Error(`unsupported maxval ${maxval.text}`);
  const payloadStart = maxval.end + 1; // exactly one whitespace byte after maxval
  const expected = width * height * channels;
  if (buf.length < payloadStart + expected) {
    throw new Error(`truncated payload: expected ${expected} bytes, file ends at byte ${buf.length}`);
  }
  const data = new Uint8Array(buf.subarray(payloadStart, payloadStart + expected));
  return { width, height, channels: channels as 1 | 3, data };
}
