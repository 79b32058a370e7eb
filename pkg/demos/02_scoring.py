"""
Scoring a segmentation
======================

Pixel accuracy and mean IoU treat every class one-vs-rest. Thickness error
compares per-layer mean thickness. Two filters narrow what gets scored.
"""
import numpy as np

from layerkit import SemanticMap, evaluate, mean_thickness, restrict_top_n

###############################################################################
# A five-layer ground truth, and a prediction whose third boundary sits
# two rows too deep.

gt = np.zeros((40, 10), dtype=np.uint8)
for k, top in enumerate([4, 10, 16, 24, 31], start=1):
    gt[top:] = k
pred = gt.copy()
pred[16:18] = 2

gt, pred = SemanticMap(gt), SemanticMap(pred)
print("gt thickness  :", mean_thickness(gt).per_layer)
print("pred thickness:", mean_thickness(pred).per_layer)

r = evaluate(pred, gt)
print(f"accuracy={r.accuracy:.4f} mIoU={r.mean_iou:.4f} MAE={r.thickness_mae_px:.3f}px k={r.k_classes_used}")

###############################################################################
# Restricting to the top three layers sends classes 4 and 5 to background
# in both maps, so they stop counting as separate classes.

p3, g3 = restrict_top_n(pred, gt, 3)
print("classes left:", np.unique(g3.classes).tolist())
print(evaluate(pred, gt, top_n=3))

###############################################################################
# Scoring against a fixed universe of 28 classes changes nothing here,
# because classes absent from both maps are left out of the mean.

print(evaluate(pred, gt, num_classes=28).mean_iou == r.mean_iou)
