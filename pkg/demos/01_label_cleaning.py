"""
Cleaning a gappy annotation
===========================

Hand-traced layer annotations are rarely complete. Some ids are skipped,
and some traces stop partway across the image. This walk-through builds
such an annotation and runs it through the cleaning pipeline.
"""
import numpy as np

from layerkit import consecutive_sets, preprocess, remove_incomplete, semantic_to_layers
from layerkit.synth import gapped_annotation

###############################################################################
# The fixture labels layers 2, 3, 5..14 and 18..20. Layer 12 stops halfway.

image, layers = gapped_annotation(width=64)
print("image shape:", image.pixels.shape)
print("annotated ids:", layers.ids)
print("layer 12 defined in", int(layers.present(12).sum()), "of", layers.width, "columns")

###############################################################################
# Incomplete layers go first, then the survivors are grouped into runs of
# consecutive ids. Runs shorter than two layers are dropped.

clean = remove_incomplete(layers)
print("complete ids:", clean.ids)
for s in consecutive_sets(clean):
    print("  set", s.layer_ids)

###############################################################################
# Each set becomes one crop with a five-row margin above and below, and a
# semantic map in which every pixel takes the id of the layer above it.

for crop, semantic in preprocess(image, layers):
    b = crop.box
    ids, counts = np.unique(semantic.classes, return_counts=True)
    print(f"crop rows [{b.y1}, {b.y2}) for set {crop.source_set.layer_ids}:",
          dict(zip(ids.tolist(), counts.tolist())))
    # layerizing the fill hands back the crop's own curves
    assert semantic_to_layers(semantic) == crop.layers
