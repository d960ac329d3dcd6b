"""
Where does a trained classifier put the 3-separability threshold of the
four-qubit noisy GHZ state?

Training labels come only from loosened intervals that leave a gap around
the true threshold (0.2 for four qubits). After training, the classifier is
swept over p = 0.0005, 0.001, ..., 1. Each point is one randomly
Pauli-rotated state. The estimate is the midpoint of the first block of
ten points from which on at least five per block are called nonseparable.

An analytic labeler with a known switch point shows what the estimator
itself can resolve.

    python3 demos/learned_bound.py [seed]
"""
import sys

from entangle_ssl import datagen as dg
from entangle_ssl import evaluate as ev
from entangle_ssl import ssl

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
n, a = 4, 0.875

oracle = ev.estimate_bound(lambda p: p > 0.2, n)
print(f"analytic labeler switching at 0.2 -> b_hat {oracle.b_hat:.4f}")

(sep_lo, sep_hi), (ent_lo, ent_hi) = dg.fuzzy_intervals(n, a)
print(f"training intervals: 3-separable [0, {sep_hi:.4f}], 3-nonseparable [{ent_lo:.4f}, 1]")

labeled, unlabeled = dg.gen_fuzzy_3sep(n, a, 200, 1000, seed)
task = dg.GhzTask(n, "fuzzy", 3, a)
validation = dg.augment_once(dg.gen_ghz_labeled(task, 200, seed, tag="validation"), seed)
cfg = ssl.TrainConfig(seed=seed, feature_scheme="GHZ", K_labeled=5, K_unlabeled=5)

for name, model in (("SLK", ssl.slk_train(labeled, cfg)),
                    ("SSL", ssl.ssl_train(labeled, unlabeled, validation, cfg).model)):
    est = ev.estimate_bound(model, n, seed=seed)
    print(f"{name}: b_hat {est.b_hat:.4f}, reference {est.reference}, relative error {est.relative_error:.3f}")
