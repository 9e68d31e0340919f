"""Train a model, then run both zero-shot protocols.

CZSL: a softmax classifier over unseen classes only, trained on latents
synthesized from the unseen attribute vectors. GZSL: a classifier over
all classes, trained on synthesized unseen latents plus encoded seen
training features, scored by the harmonic mean of seen and unseen
per-class accuracy.
"""

from zsalign import (Architecture, EvalCounts, Model, Rng, SynthConfig,
                     TrainSchedule, czsl_eval, fit, gzsl_eval, synth_generate)

ds = synth_generate(SynthConfig(proto_dim=8, sample_noise=0.5, seed=7))

arch = Architecture(visual_dim=ds.visual_dim, attr_dim=ds.attr_dim,
                    n_seen_classes=len(ds.seen_classes),
                    structure_dim=128, latent_dim=64, common_hidden=64,
                    dec_visual_hidden=64, dec_semantic_hidden=32)
model = Model(arch, Rng(1))
print("training 100 epochs (about half a minute) ...")
fit(model, ds, TrainSchedule(epochs=100, swd_directions=32), Rng(101))

czsl = czsl_eval(model, ds, rng=Rng(2))
print(f"\nCZSL unseen accuracy: {czsl.acc:.1f}% "
      f"(chance {100 / len(ds.unseen_classes):.0f}%)")
for c, acc in sorted(czsl.per_class.items()):
    print(f"  class {c}: {acc:.1f}%")

gzsl = gzsl_eval(model, ds, counts=EvalCounts(unseen=400, seen=200),
                 rng=Rng(3))
print(f"\nGZSL: U {gzsl.u:.1f}%  S {gzsl.s:.1f}%  H {gzsl.h:.1f}%")
print("\nmetrics as JSON:")
print(gzsl.to_json())
