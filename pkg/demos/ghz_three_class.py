"""
Fully separable vs biseparable vs genuinely entangled noisy GHZ states on
three qubits, from 20 labeled states.

The labeled set gets 2 random local-unitary views per state, the unlabeled
set 8. The model is scored on plain noisy GHZ states and on locally rotated
ones, with a pooled (micro-averaged) ROC and one ROC per class.

    python3 demos/ghz_three_class.py [seed]
"""
import sys

from entangle_ssl import datagen as dg
from entangle_ssl import evaluate as ev
from entangle_ssl import ssl

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
task = dg.GhzTask(3, "three-class")
print("class intervals in p:", [(round(a, 4), round(b, 4)) for a, b in task.intervals()])

labeled, unlabeled = dg.gen_ghz_sets(task, 20, 50, seed)
validation = dg.gen_ghz_labeled(task, 200, seed, tag="validation")
tests = {"plain": dg.gen_ghz_labeled(task, 1500, seed, tag="test"),
         "rotated": dg.ghz_class_test_set(1500, seed)}

cfg = ssl.TrainConfig(seed=seed, feature_scheme="P3", K_labeled=2, K_unlabeled=8)
models = {"SSL": ssl.ssl_train(labeled, unlabeled, validation, cfg).model, "SLK": ssl.slk_train(labeled, cfg)}

for name, model in models.items():
    for which, test in tests.items():
        acc, per = ev.accuracy(model, test)
        micro = ev.micro_roc(model, test).auc
        per_auc = [round(c.auc, 3) for c in ev.class_rocs(model, test)]
        print(f"{name:3s} {which:7s} accuracy {acc:.3f} per class {[round(x, 3) for x in per]} "
              f"micro AUC {micro:.3f} class AUCs {per_auc}")
