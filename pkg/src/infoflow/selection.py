"""Filter-count selection by CMI permutation testing, plus filter scoring.

Deciding how many filters a layer needs is framed as a feature-selection
stopping rule: keep moving filters from the remaining set T_r to the
selected set T_s while the candidate t still shifts I({T_r - t}; Y | {T_s, t})
significantly below its row-permuted null. Separately, an individual
filter's importance for pruning is scored with the bottleneck objective
I(X;T^i) - beta * I(T^i;Y), smaller meaning more important.
"""

from dataclasses import dataclass, field

import numpy as np

from .entropy import EntropyConfig, cmi, mmi
from .gram import KernelSpec, gram

FORWARD_KERNEL = KernelSpec.rbf_silverman(h=5.0)


@dataclass(frozen=True)
class PermutationTestConfig:
    P: int = 100
    significance: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("permutation count P must be >= 1")
        if not 0.0 < self.significance < 1.0:
            raise ValueError("significance must lie in (0, 1)")


@dataclass(frozen=True)
class CandidateTrace:
    candidate: int
    observed_bits: float
    permuted_bits: list
    p_value: float
    decision: str
    boundary: bool = False


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one permutation step or a whole greedy selection run.

    decision "stop" means the last candidate added nothing; selected_count
    is |T_s| at stopping time (the boundary rule accepts the final
    candidate before stopping, so an exhausted ranking counts it).
    """

    decision: str
    selected_count: int
    p_value: float
    trace: list = field(default_factory=list)


def _permutation_streams(seed, step_key, count):
    # Per-permutation substreams keyed by (seed, step, draw) so serial and
    # parallel evaluation orders agree.
    return [
        np.random.default_rng(np.random.SeedSequence([seed, step_key, i]))
        for i in range(count)
    ]


def cmi_permutation_step(
    Ts, Tr, Ay, t_index, samples_t, cfg=None, test=None, kernel=FORWARD_KERNEL, step_key=0
):
    """Permutation-test whether candidate t still matters given {T_s, t}.

    Computes observed = I({T_r - t}; Y | {T_s, t}), then P row-permuted
    variants of t (labels untouched, Gram rebuilt from the shuffled sample
    rows); p_value is the fraction of permutations the observed value
    reaches, and the selection continues while p_value <= significance.

    When t is the last remaining filter the observed CMI is 0 by
    convention and the step stops after accepting t.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    test = test if test is not None else PermutationTestConfig()
    Ts = list(Ts)
    Tr = list(Tr)
    if not 0 <= t_index < len(Tr):
        raise ValueError(f"t_index {t_index} out of range for {len(Tr)} remaining filters")
    t_gram = Tr[t_index]
    rest = Tr[:t_index] + Tr[t_index + 1 :]
    samples_t = np.asarray(samples_t, dtype=np.float64)
    if samples_t.ndim == 1:
        samples_t = samples_t.reshape(-1, 1)
    if samples_t.shape[0] != t_gram.n:
        raise ValueError("samples_t row count does not match the candidate Gram")

    if not rest:
        trace = CandidateTrace(
            candidate=t_index,
            observed_bits=0.0,
            permuted_bits=[],
            p_value=1.0,
            decision="stop",
            boundary=True,
        )
        return SelectionResult(
            decision="stop",
            selected_count=len(Ts) + 1,
            p_value=1.0,
            trace=[trace],
        )

    observed = cmi(rest, Ay, Ts + [t_gram], cfg).bits
    permuted = []
    for rng in _permutation_streams(test.seed, step_key, test.P):
        perm = rng.permutation(samples_t.shape[0])
        t_perm = gram(samples_t[perm], kernel)
        permuted.append(cmi(rest, Ay, Ts + [t_perm], cfg).bits)
    p_value = sum(1 for p in permuted if observed >= p) / test.P
    decision = "continue" if p_value <= test.significance else "stop"
    trace = CandidateTrace(
        candidate=t_index,
        observed_bits=observed,
        permuted_bits=permuted,
        p_value=p_value,
        decision=decision,
    )
    selected = len(Ts) + 1 if decision == "continue" else len(Ts)
    return SelectionResult(
        decision=decision, selected_count=selected, p_value=p_value, trace=[trace]
    )


def rank_filters_by_label_mi(grams, Ay, cfg=None):
    """Indices sorted by descending unconditional I(T^i; Y); ties keep order."""
    cfg = cfg if cfg is not None else EntropyConfig()
    scores = [mmi(Ay, [g], cfg).bits for g in grams]
    return sorted(range(len(grams)), key=lambda i: (-scores[i], i))


def select_filter_count(
    filters, Ay, order="mi", cfg=None, test=None, kernel=FORWARD_KERNEL
):
    """Greedy forward selection with the permutation stopping rule.

    filters is an ordered list of (GramMatrix, sample matrix) pairs. With
    order "mi" candidates are ranked by descending unconditional I(T^i;Y)
    (deterministic, ties broken by position); "given" keeps the input
    order. Returns the stopping decision, the selected count N and the
    per-candidate traces (candidate ids are positions in the input list).
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    test = test if test is not None else PermutationTestConfig()
    filters = list(filters)
    if not filters:
        raise ValueError("need at least one filter")
    grams = [g for g, _ in filters]
    if order == "mi":
        ranking = rank_filters_by_label_mi(grams, Ay, cfg)
    elif order == "given":
        ranking = list(range(len(filters)))
    else:
        raise ValueError(f"unknown ranking rule {order!r}")

    selected = []
    remaining = list(ranking)
    traces = []
    result = None
    for step, cand in enumerate(list(remaining)):
        step_result = cmi_permutation_step(
            Ts=selected,
            Tr=[grams[i] for i in remaining],
            Ay=Ay,
            t_index=remaining.index(cand),
            samples_t=filters[cand][1],
            cfg=cfg,
            test=test,
            kernel=kernel,
            step_key=step,
        )
        trace = step_result.trace[0]
        traces.append(
            CandidateTrace(
                candidate=cand,
                observed_bits=trace.observed_bits,
                permuted_bits=trace.permuted_bits,
                p_value=trace.p_value,
                decision=trace.decision,
                boundary=trace.boundary,
            )
        )
        if step_result.decision == "stop":
            n_selected = len(selected) + 1 if trace.boundary else len(selected)
            result = SelectionResult(
                decision="stop",
                selected_count=n_selected,
                p_value=step_result.p_value,
                trace=traces,
            )
            break
        selected.append(grams[cand])
        remaining.remove(cand)
    if result is None:
        # Unreachable: the boundary rule stops at the last candidate.
        result = SelectionResult(
            decision="stop",
            selected_count=len(selected),
            p_value=traces[-1].p_value if traces else 1.0,
            trace=traces,
        )
    return result


def ib_score(B, Ai, Ay, beta=2.0, cfg=None):
    """Bottleneck objective I(X;T^i) - beta * I(T^i;Y) for one filter, in bits.

    Smaller values mark filters that compress the input while staying
    label-relevant, i.e. the ones to keep when pruning.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    i_xt = mmi(B, [Ai], cfg).bits
    i_ty = mmi(Ay, [Ai], cfg).bits
    return i_xt - beta * i_ty
