#!/usr/bin/env python3
"""Rearrange BeanTech AD (BTAD) into the MVTec directory layout.

BTAD ships <product>/train/ok, <product>/test/{ok,ko} and
<product>/ground_truth/ko with masks named like the images (.png or .bmp).
This writes

    <out>/<product>/train/good/*.png
    <out>/<product>/test/good/*.png
    <out>/<product>/test/ko/*.png
    <out>/<product>/ground_truth/ko/<stem>_mask.png

    python3 scripts/beantech_to_mvtec.py /data/BTech_Dataset_transformed /data/btad_mvtec
"""

import argparse
import shutil
import sys
from pathlib import Path

from PIL import Image

IMAGE_EXTS = {".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff"}


def images(folder):
    if not folder.is_dir():
        return []
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_EXTS)


def save_png(src, dst, mask=False):
    dst.parent.mkdir(parents=True, exist_ok=True)
    if src.suffix.lower() == ".png" and not mask:
        shutil.copyfile(src, dst)
        return
    img = Image.open(src)
    if mask:
        img = img.convert("L").point(lambda v: 255 if v > 127 else 0)
    img.save(dst)


def convert_product(product, out):
    name = product.name
    counts = {"train": 0, "good": 0, "ko": 0, "masks": 0}
    for p in images(product / "train" / "ok"):
        save_png(p, out / name / "train" / "good" / (p.stem + ".png"))
        counts["train"] += 1
    for p in images(product / "test" / "ok"):
        save_png(p, out / name / "test" / "good" / (p.stem + ".png"))
        counts["good"] += 1
    masks = {m.stem: m for m in images(product / "ground_truth" / "ko")}
    for p in images(product / "test" / "ko"):
        save_png(p, out / name / "test" / "ko" / (p.stem + ".png"))
        counts["ko"] += 1
        m = masks.get(p.stem)
        if m is not None:
            save_png(m, out / name / "ground_truth" / "ko" / (p.stem + "_mask.png"), mask=True)
            counts["masks"] += 1
    return counts


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("btad_root", type=Path)
    ap.add_argument("out", type=Path)
    args = ap.parse_args()
    products = sorted(p for p in args.btad_root.iterdir() if (p / "train" / "ok").is_dir())
    if not products:
        sys.exit(f"no BTAD products (<product>/train/ok) under {args.btad_root}")
    for product in products:
        c = convert_product(product, args.out)
        print(f"{product.name}: train {c['train']}, test good {c['good']}, ko {c['ko']} ({c['masks']} masks)")


if __name__ == "__main__":
    main()
