"""
Two-qubit entanglement detection with 30 labeled states.

The labeled states are generic random two-qubit states, but the states we
care about come from the one-parameter rho_s family. SSL sees 60 unlabeled
rho_s states, guesses their labels where the network is confident, and
folds them back into training. The plain supervised baselines never see
rho_s until test time.

One seed takes a couple of minutes on a laptop core.

    python3 demos/rho_s_semi_supervised.py [seed]
"""
import sys

from entangle_ssl import datagen as dg
from entangle_ssl import evaluate as ev
from entangle_ssl import ssl

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0

labeled = dg.gen_labeled_2q(30, "F", seed)
unlabeled = dg.gen_rho_s_set(60, "F", seed, tag="unlabeled", labeled=False)
validation = dg.gen_rho_s_set(200, "F", seed, tag="validation")
test = dg.gen_rho_s_set(2000, "F", seed, tag="test")

cfg = ssl.TrainConfig(seed=seed)
print(f"{cfg.T} rounds of {cfg.epochs_update} epochs after a {cfg.epochs_warm}-epoch warm start, tau = {cfg.tau}")


def progress(t, acc, kept):
    if t % 5 == 0:
        print(f"  round {t:2d}: validation accuracy {acc:.3f}, confident parents {kept}/60")


run = ssl.ssl_train(labeled, unlabeled, validation, cfg, progress=progress)
print(f"selected model {run.selected}\n")

for name, model in (("SSL", run.model), ("SLK", ssl.slk_train(labeled, cfg)), ("SL", ssl.sl_train(labeled, cfg))):
    acc, per_class = ev.accuracy(model, test)
    auc = ev.micro_roc(model, test).auc
    print(f"{name:4s} accuracy {acc:.3f}  (separable {per_class[0]:.3f}, entangled {per_class[1]:.3f})  AUC {auc:.3f}")
