"""Run the service: configuration comes from NLI_* environment variables
(NLI_MODEL, NLI_HOST, NLI_PORT, NLI_DEVICE, NLI_MAX_BATCH)."""

import uvicorn

from .app import create_app
from .config import from_env


def main() -> None:
    config = from_env()
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")


if __name__ == "__main__":
    main()
