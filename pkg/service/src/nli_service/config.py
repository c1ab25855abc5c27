import os
from dataclasses import dataclass

DEFAULT_MODEL = "cross-encoder/nli-deberta-v3-base"


@dataclass(frozen=True)
class ServiceConfig:
    model: str = DEFAULT_MODEL
    host: str = "127.0.0.1"
    port: int = 8400
    device: str = "cpu"
    max_batch: int = 64

    def __post_init__(self) -> None:
        if not self.model:
            raise ValueError("model identifier must be non-empty")
        if not 0 < self.port < 65536:
            raise ValueError(f"port out of range: {self.port}")
        if self.max_batch < 1:
            raise ValueError(f"max_batch must be >= 1, got {self.max_batch}")


def from_env(environ: dict[str, str] | None = None) -> ServiceConfig:
    """Build a config from NLI_* environment variables.

    NLI_MODEL selects the checkpoint; ids prefixed `stub:` get the
    deterministic offline backend instead of a real model.
    """
    env = os.environ if environ is None else environ
    return ServiceConfig(
        model=env.get("NLI_MODEL", DEFAULT_MODEL),
        host=env.get("NLI_HOST", "127.0.0.1"),
        port=int(env.get("NLI_PORT", "8400")),
        device=env.get("NLI_DEVICE", "cpu"),
        max_batch=int(env.get("NLI_MAX_BATCH", "64")),
    )
