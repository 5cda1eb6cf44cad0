"""Generate the tiny adapter checkpoint: python -m model_service.make_weights"""

import argparse

from .adapters.tiny import write_weights


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="weights/tiny.pt")
    ap.add_argument("--image-size", type=int, default=512)
    ap.add_argument("--joints", type=int, default=2,
                    help="body joints in HMR outputs")
    ap.add_argument("--betas", type=int, default=2)
    args = ap.parse_args(argv)
    path = write_weights(args.out, args.image_size, args.joints, args.betas)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
