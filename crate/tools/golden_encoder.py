#!/usr/bin/env python3
"""Reference encoder for the GZC1 blob format, used to produce golden files.

Written from the format description only, without sharing code with the
Rust implementation. Regenerate with:

    python3 tools/golden_encoder.py crates/core/tests/golden
"""

import math
import random
import struct
import sys
from pathlib import Path

BLOCK = 32
RAW = 255
MAX_CODE = 2.0**30

CASES = [
    # (seed, n, error bound)
    (11, 1000, 1e-3),
    (22, 777, 1e-4),
    (33, 1500, 1e-5),
]


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def round_half_away(v):
    a = abs(v)
    r = math.floor(a)
    if a - r >= 0.5:
        r += 1
    return math.copysign(r, v) if r else 0.0


def zigzag(q):
    return 2 * q if q >= 0 else -2 * q - 1


def encode_block(block, eb):
    step = 2.0 * eb
    prev = block[0]
    codes = []
    raw = False
    for x in block[1:]:
        q = round_half_away((x - prev) / step)
        if not abs(q) <= MAX_CODE:
            raw = True
            break
        r = f32(prev + q * step)
        if not abs(r - x) <= eb:
            raw = True
            break
        codes.append(zigzag(int(q)))
        prev = r
    width = max(codes, default=0).bit_length()
    count = len(block)
    packed = 5 + ((count - 1) * width + 7) // 8
    if raw or packed > 1 + 4 * count:
        return bytes([RAW]) + b"".join(struct.pack("<f", v) for v in block)
    bits = 0
    for i, z in enumerate(codes):
        bits |= z << (i * width)
    nbytes = ((count - 1) * width + 7) // 8
    return bytes([width]) + struct.pack("<f", block[0]) + bits.to_bytes(nbytes, "little")


def encode(values, eb):
    payload = b"".join(encode_block(values[i : i + BLOCK], eb) for i in range(0, len(values), BLOCK))
    return b"GZC1" + struct.pack("<QdI", len(values), eb, len(payload)) + payload


def make_input(seed, n):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        segment = (i // 100) % 6
        if segment == 0:
            v = math.sin(i * 0.05) + rng.uniform(-0.01, 0.01)
        elif segment == 1:
            v = 0.0
        elif segment == 2:
            v = 2.5
        elif segment == 3:
            v = rng.uniform(-1.0, 1.0)
        elif segment == 4:
            v = rng.uniform(-1e5, 1e5) if rng.random() < 0.1 else i * 1e-3
        else:
            v = rng.uniform(-1e12, 1e12)
        out.append(f32(v))
    return out


def main():
    dest = Path(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/golden")
    dest.mkdir(parents=True, exist_ok=True)
    lines = []
    for seed, n, eb in CASES:
        values = make_input(seed, n)
        name = f"seed{seed}"
        (dest / f"{name}.f32").write_bytes(b"".join(struct.pack("<f", v) for v in values))
        (dest / f"{name}.gzc").write_bytes(encode(values, eb))
        lines.append(f"{name} {eb!r}")
    (dest / "cases.txt").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
