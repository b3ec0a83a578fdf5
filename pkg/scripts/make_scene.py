"""Write a synthetic RGB-D scene directory readable by `uncmap build-map --scene`.

    python scripts/make_scene.py wall out/wall --seed 7 --size 64
    python scripts/make_scene.py panorama out/pano --seed 3 --difficulty complex --node 0
"""

import argparse

from uncmap.io import write_frames
from uncmap.nav import gen_scene
from uncmap.world import flat_wall_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("kind", choices=["wall", "panorama"])
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--difficulty", default="complex", choices=["simple", "complex"])
    ap.add_argument("--node", type=int, default=0, help="panorama vantage node (0 is the hub)")
    ap.add_argument("--views", type=int, default=4)
    args = ap.parse_args()
    if args.kind == "wall":
        frames = flat_wall_scene(args.seed, args.size)
    else:
        frames = gen_scene(args.seed, args.difficulty).panorama(args.node, args.size, args.views)
    write_frames(args.out, frames)
    print(f"wrote {len(frames)} frames to {args.out}")


if __name__ == "__main__":
    main()
