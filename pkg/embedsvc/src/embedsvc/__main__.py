"""Serve the application with uvicorn, configured from EMBEDSVC_* variables."""

import logging

import uvicorn

from .app import create_app
from .config import from_env


def main() -> None:
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )
    cfg = from_env()
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="info")


if __name__ == "__main__":
    main()
