#!/usr/bin/env python3
"""Convert torchvision ResNet18 ImageNet weights into a memseg tensor archive.

    python3 scripts/convert_resnet18.py resnet18.msta
    python3 scripts/convert_resnet18.py resnet18.msta --state-dict resnet18-f37072fd.pth

conv1/bn1/layer1-3 become "frozen.*" and layer4 becomes "stage4.*"; the fc
head is dropped.
"""

import argparse
import json
import struct
import sys

import numpy as np
import torch

MAGIC = b"MEMSEGTA"
FORMAT_VERSION = 1
DTYPES = {
    torch.float32: ("f32", np.float32),
    torch.float64: ("f64", np.float64),
    torch.int64: ("i64", np.int64),
    torch.int32: ("i32", np.int32),
    torch.uint8: ("u8", np.uint8),
}


def load_state_dict(path):
    if path:
        return torch.load(path, map_location="cpu", weights_only=True)
    from torchvision.models import ResNet18_Weights, resnet18

    return resnet18(weights=ResNet18_Weights.IMAGENET1K_V1).state_dict()


def rename(key):
    if key.startswith("fc."):
        return None
    if key.startswith("layer4."):
        return "stage4." + key[len("layer4."):]
    return "frozen." + key


def write_archive(path, tensors, meta):
    entries, blobs, offset = [], [], 0
    for name, t in tensors:
        code, np_type = DTYPES[t.dtype]
        data = np.asarray(t.detach().cpu().numpy(), dtype=np.dtype(np_type).newbyteorder("<")).tobytes()
        entries.append({"name": name, "dtype": code, "shape": list(t.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"kind": "weights", "meta": meta, "tensors": entries}).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", FORMAT_VERSION, len(header)))
        f.write(header)
        for b in blobs:
            f.write(b)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("output", help="archive to write (e.g. resnet18.msta)")
    ap.add_argument("--state-dict", help="local torchvision state_dict (.pth); downloads when omitted")
    args = ap.parse_args()

    state = load_state_dict(args.state_dict)
    tensors = []
    for key, value in state.items():
        name = rename(key)
        if name is not None:
            tensors.append((name, value))
    if not any(n.startswith("stage4.") for n, _ in tensors):
        sys.exit("state_dict has no layer4.* tensors; is this a ResNet18?")
    write_archive(args.output, tensors, {"source": "torchvision resnet18 IMAGENET1K_V1"})
    print(f"wrote {len(tensors)} tensors to {args.output}")


if __name__ == "__main__":
    main()
