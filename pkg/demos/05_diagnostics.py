# Prototype/classifier agreement, attention sharpness and the memorization check.
import numpy as np
from tailcomp import SynthConfig, generate_synthetic, TrainConfig, train_head, compute_prototypes, Source
from tailcomp.evaluation import mismatch_count, sharpness_curve, memorization_check, emit_sharpness_csv

train, val, test = generate_synthetic(SynthConfig(seed=2))
head = train_head(train, TrainConfig(seed=2))
protos = compute_prototypes(train)

n, which = mismatch_count(protos, head)
print("prototypes closest to another class's weight:", n, which[:10])

curve = sharpness_curve(protos, head, train.train_counts, k=0)
print("top-5 mean similarities by rank:", curve[:5].round(3))
print("ratio rank0 / rank1:", round(curve[0] / curve[1], 2))  # tau sharpens this gap further

val_protos = compute_prototypes(val, Source.VALIDATION)
rep = memorization_check(head, train, val_protos)
print("train accuracy with validation prototypes:", round(rep.acc_total, 3), "few:", round(rep.acc_few, 3))

emit_sharpness_csv({"p2w": curve}, "sharpness_demo.csv")
print("wrote sharpness_demo.csv")
