"""The pairing loss: how the per-pair weight focuses on badly regressed pairs.

Run: python demos/pairing_loss.py
"""
import numpy as np

from tablekit.loss import LossConfig, PairObservation, pair_distance, pair_weight, pairing_loss, random_instance

# the weight rises quickly for small errors and saturates at 1 - e^-pi
for d in (0.0, 0.1, 0.25, 0.5, 1.0):
    print(f"D={d:<5} w={pair_weight(d):.5f}")

# one pair whose center->vertex offset is (4, 0): a 1 px slip each way gives D = 0.5
obs = PairObservation(pred_cv=(5, 0), gt_cv=(4, 0), pred_vc=(-3, 0), gt_vc=(-4, 0))
d = pair_distance(obs)
print("pair distance", d, "weight", round(pair_weight(d), 5))

# on a random instance the loss shrinks as predictions approach the targets
rng = np.random.default_rng(0)
targets, pred = random_instance(rng, size=16)
cfg = LossConfig(lambda_cv=1.0, lambda_vc=0.5)
for t in (1.0, 0.5, 0.1, 0.0):
    cv = targets.cv_map + t * (pred["cv_map"] - targets.cv_map)
    vc = targets.vc_map + t * (pred["vc_map"] - targets.vc_map)
    value, g_cv, g_vc = pairing_loss(cv, vc, targets, cfg)
    print(f"error scale {t:.1f}: loss {value:.5f}, nonzero grads {np.count_nonzero(g_cv) + np.count_nonzero(g_vc)}")
