"""Open every PGM under the given directories with Pillow and cross-check
the pixels against a direct read of the P5 payload."""

import pathlib
import sys

from PIL import Image


def raw_pixels(path):
    data = path.read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte before the raster
    assert fields[0] == b"P5", f"{path}: magic {fields[0]!r}"
    w, h, maxval = (int(f) for f in fields[1:])
    assert maxval == 255
    return w, h, data[pos:]


def main(dirs):
    checked = 0
    for d in map(pathlib.Path, dirs):
        files = sorted(d.glob("*.pgm"))
        if not files:
            print(f"no PGM files in {d}")
            return 1
        for f in files:
            w, h, raster = raw_pixels(f)
            with Image.open(f) as im:
                im.load()
                assert im.format == "PPM" and im.mode == "L", f"{f}: {im.format} {im.mode}"
                assert im.size == (w, h), f"{f}: size {im.size} vs header {(w, h)}"
                assert im.tobytes() == raster, f"{f}: pixel mismatch"
            checked += 1
    print(f"{checked} PGM files parsed")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
