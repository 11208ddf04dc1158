#!/usr/bin/env python3
"""Write the analytic oracle meshes (two-tone sphere, textured box) as PLY."""
import argparse
from pathlib import Path

from scenefactory.meshing import write_ply
from scenefactory.primitives import textured_box, two_tone_sphere


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", nargs="?", default="oracles")
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_ply(two_tone_sphere(), out / "sphere.ply")
    write_ply(textured_box(), out / "box.ply")
    print(f"wrote {out / 'sphere.ply'} and {out / 'box.ply'}")


if __name__ == "__main__":
    main()
