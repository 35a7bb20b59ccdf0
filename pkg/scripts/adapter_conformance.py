#!/usr/bin/env python3
"""Golden-sequence conformance check for external classifier adapters.

Drives any adapter command through the stdio protocol and verifies, in
order: the READY handshake, the OK reply grammar and normalization
tolerance, reply determinism on a repeated image, the ERR grammar for a
missing file, and that the adapter keeps serving after an error.

Exit code 0 when every step passes, 1 otherwise.
"""

import argparse
import re
import shlex
import subprocess
import sys
import tempfile
import threading
from pathlib import Path
from queue import Empty, Queue

OK_RE = re.compile(r"^OK( [^ ]+)+$")
ERR_RE = re.compile(r"^ERR .+$")
READY_RE = re.compile(r"^READY (\d+)$")
SUM_TOLERANCE = 1e-6


def write_test_image(path: Path) -> None:
    # 8x8 P6 gradient
    payload = bytearray()
    for y in range(8):
        for x in range(8):
            payload += bytes([x * 32, y * 32, (x + y) * 16])
    path.write_bytes(b"P6\n8 8\n255\n" + bytes(payload))


class Adapter:
    def __init__(self, command: str, timeout: float):
        self.timeout = timeout
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.lines: Queue = Queue()
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self):
        for line in self.proc.stdout:
            self.lines.put(line.rstrip("\n"))
        self.lines.put(None)

    def read_line(self) -> str:
        try:
            line = self.lines.get(timeout=self.timeout)
        except Empty:
            raise TimeoutError(f"no reply within {self.timeout} s")
        if line is None:
            raise EOFError("adapter closed its output")
        return line

    def send(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


def check(step: str, ok: bool, detail: str = "") -> bool:
    mark = "PASS" if ok else "FAIL"
    print(f"[{mark}] {step}" + (f" - {detail}" if detail else ""))
    return ok


def parse_ok(line: str, classes: int) -> list[float] | None:
    if not OK_RE.match(line):
        return None
    parts = line.split(" ")
    if len(parts) != classes + 1:
        return None
    try:
        probs = [float(p) for p in parts[1:]]
    except ValueError:
        return None
    if any(p < 0 for p in probs):
        return None
    if abs(sum(probs) - 1.0) > SUM_TOLERANCE:
        return None
    return probs


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("command", help="adapter command line, e.g. 'node dist/main.js ...'")
    parser.add_argument("--timeout", type=float, default=60.0)
    parser.add_argument(
        "--skip-determinism",
        action="store_true",
        help="skip the identical-reply check for nondeterministic backends",
    )
    args = parser.parse_args()

    tmp = Path(tempfile.mkdtemp(prefix="adapter-conformance-"))
    img = tmp / "probe.ppm"
    write_test_image(img)

    adapter = Adapter(args.command, args.timeout)
    all_ok = True
    try:
        line = adapter.read_line()
        m = READY_RE.match(line)
        all_ok &= check("handshake matches 'READY <C>'", bool(m), repr(line))
        if not m:
            return 1
        classes = int(m.group(1))
        all_ok &= check("class count is positive", classes >= 1, str(classes))

        adapter.send(f"CLASSIFY {img.resolve()} 1")
        first = adapter.read_line()
        probs = parse_ok(first, classes)
        all_ok &= check(
            "valid request yields 'OK <p1..pC>' summing to 1 within 1e-6",
            probs is not None,
            repr(first),
        )

        if not args.skip_determinism:
            adapter.send(f"CLASSIFY {img.resolve()} 1")
            second = adapter.read_line()
            all_ok &= check("repeated image yields an identical line", second == first)

        adapter.send(f"CLASSIFY {tmp / 'missing.ppm'} 1")
        err = adapter.read_line()
        all_ok &= check("missing file yields 'ERR <message>'", bool(ERR_RE.match(err)), repr(err))

        adapter.send(f"CLASSIFY {img.resolve()} 1")
        after = adapter.read_line()
        all_ok &= check(
            "adapter still serves after the error",
            parse_ok(after, classes) is not None,
            repr(after),
        )
    except (TimeoutError, EOFError) as e:
        all_ok = check("adapter stayed responsive", False, str(e))
    finally:
        adapter.close()

    print("CONFORMANCE " + ("PASS" if all_ok else "FAIL"))
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
