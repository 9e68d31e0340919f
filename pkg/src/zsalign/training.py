"""Annealing schedule, the three-phase adversarial alternation, and the
joint objective.

Per batch the loop runs:
  1. a joint step over every parameter group (VAE terms, cross
     reconstruction, classification, latent W2 + inverse-coral),
  2. a classifier step that maximizes the sliced Wasserstein discrepancy
     between the two classifiers (encoders/decoders frozen),
  3. `inner_repeats` encoder steps that minimize that discrepancy
     (classifiers frozen).
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from . import losses
from .optim import Adam
from .tensor import Tensor, softmax

JOINT_GROUPS = ("enc_visual", "enc_semantic", "enc_common_trunk",
                "enc_common_mu", "enc_common_logvar", "dec_visual",
                "dec_semantic", "cls1", "cls2")
CLS_GROUPS = ("cls1", "cls2")
ENC_GROUPS = ("enc_visual", "enc_semantic")

# annealing rates and end epochs; the weights stay constant afterwards
GAMMA_RATE, GAMMA_END = 0.0026, 90
L1_RATE, L1_START, L1_END = 0.044, 21, 75
L23_RATE, L23_END = 0.54, 22

LOSS_TERMS = ("vae_x", "vae_a", "rec", "cls", "dis1", "dis2", "da", "icoral")


class TrainingDivergence(RuntimeError):
    def __init__(self, term, epoch=None, batch=None):
        self.term, self.epoch, self.batch = term, epoch, batch
        where = "" if epoch is None else f" at epoch {epoch}, batch {batch}"
        super().__init__(f"non-finite loss term '{term}'{where}")


@dataclass
class TrainSchedule:
    epochs: int = 100
    batch_size: int = 50
    learning_rate: float = 1.5e-4
    swd_directions: int = 128
    inner_repeats: int = 1
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999


@dataclass
class Weights:
    gamma: float
    l1: float
    l2: float
    l3: float


def schedule_weights(sched, epoch):
    """Piecewise-linear annealing; non-decreasing, constant after the end
    epochs (90 / 75 / 22)."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    gamma = GAMMA_RATE * min(epoch, GAMMA_END)
    l1 = L1_RATE * max(0, min(epoch, L1_END) - L1_START)
    l23 = L23_RATE * min(epoch, L23_END)
    return Weights(gamma=gamma, l1=l1, l2=l23, l3=l23)


@dataclass
class StepReport:
    epoch: int = 0
    batch: int = 0
    terms: dict = field(default_factory=dict)
    weights: Weights = None


class ModelOptimizer:
    """One Adam state per parameter group so each phase can update its own
    subset while the rest stays bitwise untouched."""

    def __init__(self, model, sched):
        self.model = model
        self.adams = {
            name: Adam(getattr(model, name).params(), lr=sched.learning_rate,
                       beta1=sched.adam_beta1, beta2=sched.adam_beta2)
            for name in JOINT_GROUPS
        }

    def step(self, group_names):
        for name in group_names:
            self.adams[name].step()


def _term(name, t):
    v = float(t.data)
    if not np.isfinite(v):
        raise TrainingDivergence(name)
    return v


def step_joint(model, batch, weights, opt, rng):
    """One Adam step of the full objective over all parameter groups.
    The adversarial discrepancy terms live in the two dedicated steps."""
    x = Tensor(batch.x)
    a = Tensor(batch.a)
    sx = model.encode_visual(x)
    sa = model.encode_semantic(a)
    gx = model.encode_common(sx)
    ga = model.encode_common(sa)
    zx = model.reparameterize(gx, rng).z
    za = model.reparameterize(ga, rng).z

    terms = {}
    l_rec_xx = losses.l1_reconstruction(x, model.decode_visual(zx))
    l_rec_aa = losses.l1_reconstruction(a, model.decode_semantic(za))
    kl_x = losses.kl_to_standard_normal(gx)
    kl_a = losses.kl_to_standard_normal(ga)
    vae_x = l_rec_xx + weights.gamma * kl_x
    vae_a = l_rec_aa + weights.gamma * kl_a
    terms["vae_x"] = _term("vae_x", vae_x)
    terms["vae_a"] = _term("vae_a", vae_a)

    rec = losses.l1_reconstruction(x, model.decode_visual(za)) + \
        losses.l1_reconstruction(a, model.decode_semantic(zx))
    terms["rec"] = _term("rec", rec)

    cls = None
    for s in (sx, sa):
        for which in (1, 2):
            term, _ = losses.softmax_cross_entropy(
                model.classify(which, s), batch.y)
            cls = term if cls is None else cls + term
    terms["cls"] = _term("cls", cls)

    da = losses.gaussian_w2(gx, ga)
    terms["da"] = _term("da", da)

    su = model.encode_semantic(Tensor(batch.unseen_attrs))
    gu = model.encode_common(su)
    zu = model.reparameterize(gu, rng).z
    ic = losses.icoral(zx, zu)
    terms["icoral"] = _term("icoral", ic)

    total = vae_x + vae_a + weights.l1 * rec + cls + \
        weights.l3 * (ic + da)
    _term("total", total)
    total.backward()
    opt.step(JOINT_GROUPS)
    model.zero_grads()
    return StepReport(terms=terms, weights=weights)


def _swd_pair(model, s, directions):
    p1 = softmax(model.classify(1, s))
    p2 = softmax(model.classify(2, s))
    return losses.sliced_wasserstein_discrepancy(p1, p2, directions)


def step_max_discrepancy(model, batch, weights, opt, rng, sched):
    """Update only the two classifiers: keep them accurate while pushing
    their predictions apart. Encoders and decoders are frozen."""
    sx = model.encode_visual(Tensor(batch.x)).detach()
    sa = model.encode_semantic(Tensor(batch.a)).detach()
    dirs = rng.unit_directions(sched.swd_directions,
                              model.arch.n_seen_classes)
    cls = None
    for s in (sx, sa):
        for which in (1, 2):
            term, _ = losses.softmax_cross_entropy(
                model.classify(which, s), batch.y)
            cls = term if cls is None else cls + term
    dis1 = -_swd_pair(model, sx, dirs) - _swd_pair(model, sa, dirs)
    terms = {"cls": _term("cls", cls), "dis1": _term("dis1", dis1)}
    total = cls + weights.l2 * dis1
    _term("total", total)
    total.backward()
    opt.step(CLS_GROUPS)
    model.zero_grads()
    return StepReport(terms=terms, weights=weights)


def step_min_discrepancy(model, batch, weights, opt, rng, sched, repeats=None):
    """Update only the two task-specific encoders to shrink the classifier
    discrepancy. Classifiers are frozen."""
    repeats = sched.inner_repeats if repeats is None else repeats
    terms = {}
    for _ in range(max(1, repeats)):
        sx = model.encode_visual(Tensor(batch.x))
        sa = model.encode_semantic(Tensor(batch.a))
        dirs = rng.unit_directions(sched.swd_directions,
                                   model.arch.n_seen_classes)
        dis2 = _swd_pair(model, sx, dirs) + _swd_pair(model, sa, dirs)
        terms["dis2"] = _term("dis2", dis2)
        total = weights.l2 * dis2
        _term("total", total)
        total.backward()
        opt.step(ENC_GROUPS)
        model.zero_grads()
    return StepReport(terms=terms, weights=weights)


@dataclass
class AblationFlags:
    disable_sa: bool = False
    disable_da_icoral: bool = False
    disable_icoral: bool = False


def effective_weights(weights, flags):
    w = Weights(**asdict(weights))
    if flags.disable_sa:
        w.l2 = 0.0
    if flags.disable_da_icoral:
        w.l3 = 0.0
    return w


def train_epoch(model, ds, sched, epoch, rng, opt, flags=None):
    """One pass of shuffled mini-batches; per batch: joint step, classifier
    discrepancy maximization, encoder discrepancy minimization."""
    from .data import batch_iter
    flags = flags or AblationFlags()
    weights = effective_weights(schedule_weights(sched, epoch), flags)
    sums = {t: 0.0 for t in LOSS_TERMS}
    n_batches = 0
    r_shuffle, r_step = rng.spawn(2)
    for bi, batch in enumerate(batch_iter(ds, sched.batch_size, r_shuffle)):
        try:
            jw = weights
            if flags.disable_icoral:
                # drop only the inverse-coral term: reuse the joint step with
                # a zero-covariance stand-in is messier than just gating here
                rep = _step_joint_gated(model, batch, jw, opt, r_step,
                                        with_icoral=False)
            else:
                rep = step_joint(model, batch, jw, opt, r_step)
            for k, v in rep.terms.items():
                sums[k] = sums.get(k, 0.0) + v
            if not flags.disable_sa:
                rep = step_max_discrepancy(model, batch, weights, opt,
                                           r_step, sched)
                sums["dis1"] += rep.terms["dis1"]
                rep = step_min_discrepancy(model, batch, weights, opt,
                                           r_step, sched)
                sums["dis2"] += rep.terms["dis2"]
            n_batches += 1
        except TrainingDivergence as e:
            raise TrainingDivergence(e.term, epoch, bi) from None
    if n_batches == 0:
        raise ValueError("empty training split")
    return {t: sums[t] / n_batches for t in LOSS_TERMS}


def _step_joint_gated(model, batch, weights, opt, rng, with_icoral=True):
    if with_icoral:
        return step_joint(model, batch, weights, opt, rng)
    # identical to step_joint but without the inverse-coral term
    x = Tensor(batch.x)
    a = Tensor(batch.a)
    sx = model.encode_visual(x)
    sa = model.encode_semantic(a)
    gx = model.encode_common(sx)
    ga = model.encode_common(sa)
    zx = model.reparameterize(gx, rng).z
    za = model.reparameterize(ga, rng).z
    terms = {}
    vae_x = losses.l1_reconstruction(x, model.decode_visual(zx)) + \
        weights.gamma * losses.kl_to_standard_normal(gx)
    vae_a = losses.l1_reconstruction(a, model.decode_semantic(za)) + \
        weights.gamma * losses.kl_to_standard_normal(ga)
    rec = losses.l1_reconstruction(x, model.decode_visual(za)) + \
        losses.l1_reconstruction(a, model.decode_semantic(zx))
    cls = None
    for s in (sx, sa):
        for which in (1, 2):
            term, _ = losses.softmax_cross_entropy(
                model.classify(which, s), batch.y)
            cls = term if cls is None else cls + term
    da = losses.gaussian_w2(gx, ga)
    terms["vae_x"] = _term("vae_x", vae_x)
    terms["vae_a"] = _term("vae_a", vae_a)
    terms["rec"] = _term("rec", rec)
    terms["cls"] = _term("cls", cls)
    terms["da"] = _term("da", da)
    terms["icoral"] = 0.0
    total = vae_x + vae_a + weights.l1 * rec + cls + weights.l3 * da
    _term("total", total)
    total.backward()
    opt.step(JOINT_GROUPS)
    model.zero_grads()
    return StepReport(terms=terms, weights=weights)


def fit(model, ds, sched, rng, flags=None, progress=None):
    """Run the full schedule; returns one row of mean loss terms plus the
    weights per epoch."""
    if model.arch.visual_dim != ds.visual_dim:
        raise ValueError(f"model visual_dim {model.arch.visual_dim} != "
                         f"dataset visual_dim {ds.visual_dim}")
    if model.arch.attr_dim != ds.attr_dim:
        raise ValueError(f"model attr_dim {model.arch.attr_dim} != "
                         f"dataset attr_dim {ds.attr_dim}")
    flags = flags or AblationFlags()
    opt = ModelOptimizer(model, sched)
    curves = []
    epoch_rngs = rng.spawn(max(sched.epochs, 1))
    for epoch in range(sched.epochs):
        means = train_epoch(model, ds, sched, epoch, epoch_rngs[epoch], opt,
                            flags)
        w = effective_weights(schedule_weights(sched, epoch), flags)
        row = {"epoch": epoch, **means, "gamma": w.gamma, "l1": w.l1,
               "l2": w.l2, "l3": w.l3}
        curves.append(row)
        if progress is not None:
            progress(row)
    return curves


CURVES_HEADER = ("epoch,vae_x,vae_a,rec,cls,dis1,dis2,da,icoral,"
                 "gamma,l1,l2,l3")


def write_curves(curves, path):
    lines = [CURVES_HEADER]
    for row in curves:
        vals = [str(int(row["epoch"]))]
        for key in ("vae_x", "vae_a", "rec", "cls", "dis1", "dis2", "da",
                    "icoral", "gamma", "l1", "l2", "l3"):
            vals.append(f"{row[key]:.6f}")
        lines.append(",".join(vals))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
