"""Run the gateway: `python -m semcom_gateway [--stub] [--config cfg.json] ...`"""

from __future__ import annotations

import argparse
import dataclasses

import uvicorn

from semcom_gateway.app import create_app
from semcom_gateway.config import GatewayConfig, load_config


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="semcom-gateway",
                                     description="Model gateway server (protocol v1)")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--stub", action="store_true",
                        help="serve deterministic canned responses (no models)")
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args(argv)

    config = load_config(args.config)
    overrides = {}
    if args.stub:
        overrides["mode"] = "stub"
    if args.host is not None:
        overrides["host"] = args.host
    if args.port is not None:
        overrides["port"] = args.port
    if overrides:
        config = GatewayConfig(**{**dataclasses.asdict(config), **overrides})

    uvicorn.run(create_app(config), host=config.host, port=config.port)


if __name__ == "__main__":
    main()
