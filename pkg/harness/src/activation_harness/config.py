from dataclasses import dataclass

ARCHITECTURES = ("lenet5-like", "small-alexnet-like")
ACTIVATIONS = ("sigmoid", "relu")


@dataclass(frozen=True)
class HarnessConfig:
    """Training + dump settings.

    conv_filters is the per-conv-layer filter count: two entries for the
    lenet5-like architecture, four for small-alexnet-like. Every dumped
    tensor's first dimension equals batch_size (incomplete trailing batches
    are dropped). dump_every selects which batch indices of each epoch are
    dumped (0, dump_every, 2*dump_every, ...).
    """

    architecture: str = "lenet5-like"
    conv_filters: tuple = (6, 12)
    dataset: str = "auto"
    subset_size: int = 5000
    lr: float = 0.1
    momentum: float = 0.95
    epochs: int = 2
    batch_size: int = 128
    dump_every: int = 50
    activation: str = "sigmoid"
    seed: int = 0
    post_pool: bool = False
    data_dir: str = None
    run_id: str = "run"

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        expected_convs = 2 if self.architecture == "lenet5-like" else 4
        if len(self.conv_filters) != expected_convs:
            raise ValueError(
                f"{self.architecture} needs {expected_convs} conv filter counts, "
                f"got {self.conv_filters}"
            )
        if self.batch_size < 2 or self.epochs < 1 or self.dump_every < 1:
            raise ValueError("batch_size >= 2, epochs >= 1, dump_every >= 1 required")
