"""Service entry point: python -m model_service --config service.json"""

import argparse
import sys

from .app import create_app
from .adapters.base import ServiceStartupError
from .config import ServiceConfig, build_adapters


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="JSON config file (see README)")
    ap.add_argument("--host", default=None)
    ap.add_argument("--port", type=int, default=None)
    ap.add_argument("--weights", default=None,
                    help="override weights_path from the config")
    args = ap.parse_args(argv)

    cfg = ServiceConfig.load(args.config) if args.config else ServiceConfig()
    if args.host:
        cfg.host = args.host
    if args.port is not None:
        cfg.port = args.port
    if args.weights:
        cfg.weights_path = args.weights

    try:
        adapters = build_adapters(cfg)
    except ServiceStartupError as exc:
        print(f"refusing to start: {exc}", file=sys.stderr)
        return 1

    import uvicorn

    app = create_app(adapters, workers=cfg.workers)
    print(f"model-service ({adapters.model_id}) on "
          f"http://{cfg.host}:{cfg.port}", flush=True)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
