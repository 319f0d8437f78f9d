"""Layer-chain audits: data-processing inequalities and plane trajectories.

A feedforward network's layer representations form a Markov chain from the
input, and the backpropagated error signals form one from the output, so
the MMI values along both chains should be non-increasing. Violations are
reported with their positions rather than raised: the estimator is known
to disrupt the error chain when errors get tiny and the bandwidth rule
degrades, and that behavior is exactly what the audit is for.
"""

from dataclasses import dataclass, field

from .entropy import EntropyConfig, mmi, _hadamard_accumulate
from .gram import KernelSpec, gram, label_gram
from .pid import PairSamplingPolicy, layer_pid
from .tensorio import load_batch

# Adjacent chain increases below this are round-off, not violations.
_CHAIN_TOL = 1e-9

FORWARD_KERNEL = KernelSpec.rbf_silverman(h=5.0)
ERROR_KERNEL = KernelSpec.rbf_silverman(h=0.1)


@dataclass(frozen=True)
class GramGroup:
    """Named group of Gram matrices: C per-filter ones for conv, one for fc."""

    name: str
    grams: list


@dataclass(frozen=True)
class ChainReport:
    """MMI values along one chain plus the spots where they increase.

    Values run along the chain direction (forward: input side towards the
    output; error: output side towards the input). Violations are 1-based
    (position, position+1) pairs.
    """

    direction: str
    values: list
    violations: list
    violation_fraction: float


@dataclass(frozen=True)
class IpPoint:
    layer: str
    epoch: int
    x_bits: float
    y_bits: float
    plane: str


@dataclass(frozen=True)
class SkippedLayer:
    epoch: int
    layer: str
    reason: str


@dataclass(frozen=True)
class IpTrajectory:
    points: list
    skipped: list = field(default_factory=list)


@dataclass(frozen=True)
class BatchGrams:
    """All Gram matrices of one dumped mini-batch."""

    input_gram: object
    labels_gram: object
    layer_groups: list
    error_groups: list


def snapshot_gram_group(snapshot, kernel=FORWARD_KERNEL):
    """Gram matrices for every matrix of a layer snapshot, in filter order."""
    return GramGroup(
        name=snapshot.name, grams=[gram(m, kernel) for m in snapshot.matrices]
    )


def load_batch_grams(
    manifest, epoch, batch, forward_kernel=FORWARD_KERNEL, error_kernel=ERROR_KERNEL
):
    """Load one batch and build every Gram the analyses need.

    Activations use the forward kernel (default h=5), error signals the
    error kernel (default h=0.1) and labels the delta kernel.
    """
    input_snap, labels_snap, layers, errors = load_batch(manifest, epoch, batch)
    return BatchGrams(
        input_gram=gram(input_snap.matrices[0], forward_kernel),
        labels_gram=label_gram(labels_snap.matrices[0][:, 0]),
        layer_groups=[snapshot_gram_group(s, forward_kernel) for s in layers],
        error_groups=[snapshot_gram_group(s, error_kernel) for s in errors],
    )


def group_joint_gram(group):
    """Collapse a Gram group to the single normalized Hadamard product."""
    return _hadamard_accumulate(group.grams)


def chain_from_values(direction, named_values):
    """Build a ChainReport from (name, bits) pairs; pure arithmetic."""
    named_values = list(named_values)
    if len(named_values) < 2:
        raise ValueError("a chain needs at least two values")
    violations = []
    for k in range(len(named_values) - 1):
        if named_values[k + 1][1] > named_values[k][1] + _CHAIN_TOL:
            violations.append((k + 1, k + 2))
    return ChainReport(
        direction=direction,
        values=named_values,
        violations=violations,
        violation_fraction=len(violations) / (len(named_values) - 1),
    )


def dpi_forward(B, layers, cfg=None):
    """Audit I(X;T_1) >= I(X;T_2) >= ... along the activation chain.

    B is the input Gram; each layer contributes the MMI between B and its
    Gram group (all per-filter matrices for conv, one for fc).
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    if len(layers) < 2:
        raise ValueError("forward DPI audit needs at least two layers")
    values = [(g.name, mmi(B, g.grams, cfg).bits) for g in layers]
    return chain_from_values("forward", values)


def dpi_error(delta_out, errors, cfg=None):
    """Audit I(d_K;d_{K-1}) >= ... >= I(d_K;d_1) along the error chain.

    delta_out is the output layer's error Gram; errors are the remaining
    error-signal groups ordered from the output side towards the input.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    if len(errors) < 2:
        raise ValueError("error DPI audit needs at least two error groups")
    values = [(g.name, mmi(delta_out, g.grams, cfg).bits) for g in errors]
    return chain_from_values("error", values)


def _clamp_tiny_negative(bits):
    if -_CHAIN_TOL <= bits < 0.0:
        return 0.0
    return bits


def ip_trajectory(
    manifest,
    plane="ip",
    layers=None,
    cfg=None,
    policy=None,
    forward_kernel=FORWARD_KERNEL,
    seed=0,
):
    """Per-epoch plane coordinates for the selected layers.

    The "ip" plane emits (I(X;T), I(T;Y)); the "mip" plane substitutes both
    coordinates with the pair-averaged weighted non-redundant information
    of the layer's feature maps (with the input Gram, then the label Gram,
    as the reference). Each epoch's point averages all dumped batches of
    that epoch. Layers without feature-map pairs are skipped on the mip
    plane and recorded.
    """
    if plane not in ("ip", "mip"):
        raise ValueError(f"unknown plane {plane!r}")
    cfg = cfg if cfg is not None else EntropyConfig()
    points = []
    skipped = []
    wanted = set(layers) if layers is not None else None
    if wanted is not None and not wanted:
        raise ValueError("empty layer selection")
    seen = set()
    for ei, epoch_entry in enumerate(manifest.epochs):
        sums = {}
        counts = {}
        for bi in range(len(epoch_entry.batches)):
            grams = load_batch_grams(manifest, ei, bi, forward_kernel=forward_kernel)
            for group in grams.layer_groups:
                if wanted is not None and group.name not in wanted:
                    continue
                seen.add(group.name)
                if plane == "ip":
                    x = mmi(grams.input_gram, group.grams, cfg).bits
                    y = mmi(grams.labels_gram, group.grams, cfg).bits
                else:
                    if len(group.grams) < 2:
                        if not any(
                            s.epoch == epoch_entry.epoch and s.layer == group.name
                            for s in skipped
                        ):
                            skipped.append(
                                SkippedLayer(
                                    epoch=epoch_entry.epoch,
                                    layer=group.name,
                                    reason="no feature-map pairs",
                                )
                            )
                        continue
                    pol = (
                        policy
                        if policy is not None
                        else PairSamplingPolicy.default(len(group.grams), seed=seed)
                    )
                    x = layer_pid(
                        grams.input_gram, group.grams, pol, cfg, layer=group.name
                    ).nonredundant_bits
                    y = layer_pid(
                        grams.labels_gram, group.grams, pol, cfg, layer=group.name
                    ).nonredundant_bits
                sx, sy = sums.get(group.name, (0.0, 0.0))
                sums[group.name] = (sx + x, sy + y)
                counts[group.name] = counts.get(group.name, 0) + 1
        for name, (sx, sy) in sums.items():
            c = counts[name]
            points.append(
                IpPoint(
                    layer=name,
                    epoch=epoch_entry.epoch,
                    x_bits=_clamp_tiny_negative(sx / c),
                    y_bits=_clamp_tiny_negative(sy / c),
                    plane=plane,
                )
            )
    if wanted is not None:
        missing = wanted - seen
        if missing:
            raise ValueError(f"layers not present in manifest: {sorted(missing)}")
    return IpTrajectory(points=points, skipped=skipped)
