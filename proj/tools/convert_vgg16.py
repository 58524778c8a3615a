#!/usr/bin/env python3
"""Convert a torchvision VGG-16 state_dict into an mccsod encoder archive.

    python convert_vgg16.py vgg16-397923af.pth vgg16.mccsodar
    python convert_vgg16.py --download vgg16.mccsodar   # needs torchvision and network access

Only the thirteen convolutions of `features` are kept; the classifier is dropped.
"""

import argparse
import json
import struct
import sys

import numpy as np

# torchvision `features.N` index of every convolution, grouped by encoder block.
VGG16_CONV_INDICES = [[0, 2], [5, 7], [10, 12, 14], [17, 19, 21], [24, 26, 28]]

MAGIC = b"MCCSODAR"
VERSION = 1
DTYPES = {np.dtype("float32"): 1, np.dtype("float64"): 2, np.dtype("int64"): 3}


def key_map():
    """(torchvision key, archive name) pairs in encoder order."""
    pairs = []
    for block, indices in enumerate(VGG16_CONV_INDICES, start=1):
        for conv, idx in enumerate(indices, start=1):
            for kind in ("weight", "bias"):
                pairs.append((f"features.{idx}.{kind}", f"enc.b{block}.c{conv}.{kind}"))
    return pairs


def convert(state_dict):
    arrays = {}
    for src, dst in key_map():
        if src not in state_dict:
            raise KeyError(f"state_dict has no '{src}'")
        value = state_dict[src]
        if hasattr(value, "detach"):
            value = value.detach().cpu().numpy()
        arrays[dst] = np.ascontiguousarray(value, dtype=np.float32)
    return arrays


def write_archive(path, arrays, metadata=""):
    meta = metadata.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(meta)))
        f.write(meta)
        f.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            a = arrays[name]
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BI", DTYPES[a.dtype], a.ndim))
            f.write(struct.pack(f"<{a.ndim}q", *a.shape))
            f.write(a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def read_archive(path):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise ValueError(f"{path} is not an mccsod archive")
        version, meta_len = struct.unpack("<IQ", f.read(12))
        if version != VERSION:
            raise ValueError(f"unsupported archive version {version}")
        meta = f.read(meta_len).decode("utf-8")
        (count,) = struct.unpack("<I", f.read(4))
        inverse = {v: k for k, v in DTYPES.items()}
        arrays = {}
        for _ in range(count):
            (n,) = struct.unpack("<I", f.read(4))
            name = f.read(n).decode("utf-8")
            tag, ndim = struct.unpack("<BI", f.read(5))
            shape = struct.unpack(f"<{ndim}q", f.read(8 * ndim))
            dtype = inverse[tag].newbyteorder("<")
            size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            arrays[name] = np.frombuffer(f.read(size), dtype=dtype).reshape(shape)
        return meta, arrays


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("source", nargs="?", help="torchvision VGG-16 .pth state_dict")
    p.add_argument("output", help="archive to write")
    p.add_argument("--download", action="store_true", help="fetch ImageNet weights through torchvision")
    args = p.parse_args(argv)

    import torch

    if args.download:
        import torchvision

        state = torchvision.models.vgg16(weights="IMAGENET1K_V1").state_dict()
        origin = "torchvision vgg16 IMAGENET1K_V1"
    elif args.source:
        state = torch.load(args.source, map_location="cpu", weights_only=True)
        if "state_dict" in state:
            state = state["state_dict"]
        origin = args.source
    else:
        p.error("give a .pth file or --download")

    arrays = convert(state)
    write_archive(args.output, arrays, json.dumps({"source": origin, "normalization": "imagenet"}))
    total = sum(a.size for a in arrays.values())
    print(f"wrote {len(arrays)} arrays ({total} parameters) to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
