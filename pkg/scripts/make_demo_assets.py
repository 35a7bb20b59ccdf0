#!/usr/bin/env python3
"""Write the six-region demo instance as CLI-consumable files."""

import argparse
from pathlib import Path

from semtx.classifier import save_prototype_model
from semtx.imaging import save_mask, save_raster
from semtx.synth import six_region_instance


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo", help="target directory")
    args = parser.parse_args()
    out = Path(args.out)
    (out / "templates").mkdir(parents=True, exist_ok=True)
    inst = six_region_instance()
    save_raster(inst.image, out / "image.pgm")
    save_mask(inst.background_mask.complement(), out / "object.pgm")
    # templates live in their own directory so template-globbing adapters
    # can point straight at it
    save_prototype_model(inst.model, out / "templates" / "model.json")
    print(f"wrote image.pgm, object.pgm, templates/model.json (+templates) to {out}/")
    print("target class: 1 (region 2 discriminative, region 4 misleading)")


if __name__ == "__main__":
    main()
