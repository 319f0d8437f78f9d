"""Pairwise redundancy/synergy surrogates for feature-map groups.

Full decomposition of I(X; {T^1..T^C}) into synergy, redundancy and unique
terms is underdetermined from the three measurable MI quantities, so two
linear combinations are tracked instead, averaged over sampled feature-map
pairs: the redundancy-synergy trade-off I(X;T^i) + I(X;T^j) - I(X;{T^i,T^j})
(positive means redundancy dominates, negative synergy) and the weighted
non-redundant information 2*I(X;{T^i,T^j}) - I(X;T^i) - I(X;T^j).
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .entropy import EntropyConfig, mmi

# Pairs whose MMI sits below this are excluded from percentage averages
# (the ratio is undefined at a zero denominator) and counted as skipped.
_MMI_FLOOR = 1e-12

# Exhaustive enumeration up to C(C-1)/2 = 2016 pairs (C = 64); beyond that
# default to 2016 sampled pairs.
_EXHAUSTIVE_PAIR_LIMIT = 2016


@dataclass(frozen=True)
class PairSamplingPolicy:
    """How to pick unordered feature-map pairs.

    mode "exhaustive" enumerates all C(C-1)/2 pairs; "random" draws k
    distinct pairs without replacement using the given seed.
    """

    mode: str = "exhaustive"
    k: int = None
    seed: int = None

    def __post_init__(self):
        if self.mode not in ("exhaustive", "random"):
            raise ValueError(f"unknown pair sampling mode {self.mode!r}")
        if self.mode == "random":
            if self.k is None or self.k < 1:
                raise ValueError("random pair sampling needs k >= 1")
            if self.seed is None:
                raise ValueError("random pair sampling needs a seed")

    @classmethod
    def exhaustive(cls):
        return cls(mode="exhaustive")

    @classmethod
    def random(cls, k, seed):
        return cls(mode="random", k=k, seed=seed)

    @classmethod
    def default(cls, channels, seed=0):
        """Exhaustive up to C = 64, else 2016 seeded random pairs."""
        if channels * (channels - 1) // 2 <= _EXHAUSTIVE_PAIR_LIMIT:
            return cls.exhaustive()
        return cls.random(k=_EXHAUSTIVE_PAIR_LIMIT, seed=seed)

    def pairs(self, channels):
        """The ordered list of (i, j) index pairs this policy evaluates."""
        all_pairs = list(itertools.combinations(range(channels), 2))
        if self.mode == "exhaustive":
            return all_pairs
        if self.k > len(all_pairs):
            raise ValueError(
                f"asked for {self.k} pairs but only {len(all_pairs)} exist"
            )
        rng = np.random.default_rng(self.seed)
        chosen = rng.choice(len(all_pairs), size=self.k, replace=False)
        return [all_pairs[i] for i in sorted(chosen)]


@dataclass(frozen=True)
class PidReport:
    """Pair-averaged decomposition quantities for one layer.

    Percentage forms divide each pair's quantity by that pair's MMI before
    averaging, so tradeoff_pct + nonredundant_pct = 1.
    """

    layer: str
    tradeoff_bits: float
    nonredundant_bits: float
    tradeoff_pct: float
    nonredundant_pct: float
    pairs_evaluated: int
    pairs_skipped: int = 0


def _pair_terms(B, Ai, Aj, cfg):
    i_xi = mmi(B, [Ai], cfg).bits
    i_xj = mmi(B, [Aj], cfg).bits
    i_pair = mmi(B, [Ai, Aj], cfg).bits
    return i_xi, i_xj, i_pair


def tradeoff(B, Ai, Aj, cfg=None):
    """Redundancy-synergy trade-off of one feature-map pair, in bits.

    Equals redundancy minus synergy; symmetric in (Ai, Aj).
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    i_xi, i_xj, i_pair = _pair_terms(B, Ai, Aj, cfg)
    return i_xi + i_xj - i_pair


def nonredundant(B, Ai, Aj, cfg=None):
    """Weighted non-redundant information of one pair, in bits.

    Equals the two unique terms plus twice the synergy; together with
    tradeoff it reconstructs the pair MMI exactly.
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    i_xi, i_xj, i_pair = _pair_terms(B, Ai, Aj, cfg)
    # grouping the single-map terms keeps the value exactly symmetric in (Ai, Aj)
    return 2.0 * i_pair - (i_xi + i_xj)


def layer_pid(B, As, policy=None, cfg=None, layer=""):
    """Average the two pair quantities over sampled feature-map pairs.

    Bits averages run over every sampled pair; percentage averages skip
    pairs whose MMI is below 1e-12 (counted in pairs_skipped).
    """
    cfg = cfg if cfg is not None else EntropyConfig()
    As = list(As)
    if len(As) < 2:
        raise ValueError(f"layer {layer!r}: need C >= 2 feature maps, got {len(As)}")
    policy = policy if policy is not None else PairSamplingPolicy.default(len(As))
    # The single-map MI enters every pair containing that map; compute once.
    singles = [mmi(B, [A], cfg).bits for A in As]
    pairs = policy.pairs(len(As))
    trade_sum = 0.0
    nonred_sum = 0.0
    trade_pct_sum = 0.0
    nonred_pct_sum = 0.0
    skipped = 0
    for i, j in pairs:
        i_pair = mmi(B, [As[i], As[j]], cfg).bits
        trade = singles[i] + singles[j] - i_pair
        nonred = 2.0 * i_pair - (singles[i] + singles[j])
        trade_sum += trade
        nonred_sum += nonred
        if i_pair < _MMI_FLOOR:
            skipped += 1
        else:
            trade_pct_sum += trade / i_pair
            nonred_pct_sum += nonred / i_pair
    n_pairs = len(pairs)
    n_pct = n_pairs - skipped
    return PidReport(
        layer=layer,
        tradeoff_bits=trade_sum / n_pairs,
        nonredundant_bits=nonred_sum / n_pairs,
        tradeoff_pct=trade_pct_sum / n_pct if n_pct else float("nan"),
        nonredundant_pct=nonred_pct_sum / n_pct if n_pct else float("nan"),
        pairs_evaluated=n_pairs,
        pairs_skipped=skipped,
    )
