# Knowledge transfer on a toy problem small enough to read by eye.
import numpy as np
from tailcomp import ClassifierHead, PrototypeSet, Source
from tailcomp.transfer import attention_weights, eligible_set, kt_vector, build_hybrid, build_continual, TransferConfig

# three common classes along the axes, one rare class between the first two
W = np.array([[1.0, 0.0, 0.0, 0.3],
              [0.0, 1.0, 0.0, 0.1],
              [0.0, 0.0, 1.0, 0.9]])     # rare class weight is poorly trained
P = np.array([[0.9, 0.0, 0.0, 0.6],
              [0.0, 0.9, 0.0, 0.6],
              [0.0, 0.0, 0.9, 0.1]])
counts = np.array([300, 250, 200, 6])
head, protos = ClassifierHead(W, 16.0), PrototypeSet(P, Source.TRAIN)

print("eligible donors for k=20:", eligible_set(counts, 20))
alpha = attention_weights(P[:, 3], W[:, :3], tau=10)
print("attention of the rare prototype over donors:", alpha.round(4))
print("sharper with tau=50:", attention_weights(P[:, 3], W[:, :3], tau=50).round(4))

kt = kt_vector(3, protos, head, counts, 20)
print("transferred vector:", kt.round(3))

h = build_hybrid(protos, head, counts, 20)
c = build_continual(protos, head, counts, 20)
print("hybrid column:", h.weights[:, 3].round(3), "norm", np.linalg.norm(h.weights[:, 3]).round(3))
print("continual column:", c.weights[:, 3].round(3))

wp = build_hybrid(protos, head, counts, 20, TransferConfig(direction="w2p"))
print("w2p direction (query w, values p):", wp.weights[:, 3].round(3))
