"""Winner-take-all LAMSTAR-style classifier.

Each template column is a subword handled by its own SOM module: a
dynamically grown store of unit-norm neuron weight vectors. A subword's
winner is the neuron with the highest dot product, provided it clears the
winner threshold; otherwise a new neuron is created from the subword
(training) or the module abstains (inference). A zero-initialized
decision layer links winning neurons to classes and is trained by
punishment/reward increments. The normalized variant reads each link
weight divided by its reward count, capping growth of links that win
often.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from irislam.errors import FormatError
from irislam.normalization import IrisTemplate

_ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class LamstarConfig:
    learning_rate: float = 0.8  # alpha in w <- w + alpha*(s - w)
    winner_threshold: float = 0.95  # minimum dot product to claim a winner
    convergence_target: float = 0.9999  # stop pulling the winner once dot >= this
    max_update_iters: int = 100
    delta: float = 0.05  # reward/punishment increment
    normalized: bool = False  # divide link weights by reward counts when scoring
    epochs: int = 10
    error_driven: bool = False  # update a link only when its class sum has the wrong sign


@dataclass(frozen=True)
class Subword:
    """A unit-norm template column (or the zero vector, flagged)."""

    values: np.ndarray
    source_column: int = 0
    is_zero: bool = False


@dataclass(eq=False)
class SomModule:
    """Ordered store of unit-norm neuron weight vectors for one column."""

    dim: int
    weights: np.ndarray = None  # (n_neurons, dim)

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.empty((0, self.dim), dtype=np.float64)

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[0]


def normalize_subword(x: np.ndarray, source_column: int = 0) -> Subword:
    """Scale to unit Euclidean norm; a (near-)zero vector is flagged."""
    x = np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(x))
    if norm < _ZERO_NORM_EPS:
        return Subword(values=np.zeros_like(x), source_column=source_column, is_zero=True)
    return Subword(values=x / norm, source_column=source_column, is_zero=False)


def template_to_subwords(t: IrisTemplate) -> list[Subword]:
    """One normalized subword per template column, in column order."""
    return [normalize_subword(t.values[:, j], source_column=j) for j in range(t.angular_res)]


def _subword_matrix(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-normalized (num_columns, dim) matrix plus zero-column flags."""
    cols = values.T.astype(np.float64, copy=True)
    norms = np.linalg.norm(cols, axis=1)
    zero = norms < _ZERO_NORM_EPS
    cols[zero] = 0.0
    cols[~zero] /= norms[~zero, None]
    return cols, zero


def som_present(
    module: SomModule, s: Subword, cfg: LamstarConfig, learn: bool = True
) -> tuple[int | None, bool]:
    """Present one subword to one module.

    Returns (winner index, created). The best-matching neuron wins if its
    dot product clears cfg.winner_threshold (ties go to the lowest index).
    With learn=True a losing presentation appends a new neuron equal to
    the subword, and a winning neuron is pulled toward the subword by
    w <- w + alpha*(s - w) (renormalized each step) until its dot product
    reaches cfg.convergence_target. Zero-flagged subwords abstain.
    """
    if s.is_zero:
        return None, False
    if module.n_neurons:
        dots = module.weights @ s.values
        winner = int(np.argmax(dots))
        if dots[winner] >= cfg.winner_threshold:
            if learn:
                w = module.weights[winner]
                for _ in range(cfg.max_update_iters):
                    if w @ s.values >= cfg.convergence_target:
                        break
                    w = w + cfg.learning_rate * (s.values - w)
                    w = w / np.linalg.norm(w)
                module.weights[winner] = w
            return winner, False
    if not learn:
        return None, False
    module.weights = np.vstack([module.weights, s.values[None, :]])
    return module.n_neurons - 1, True


class DecisionLayer:
    """Link weights from (module, neuron) pairs to classes.

    Backed by dense arrays over globally numbered neurons; all weights and
    reward counts start at zero.
    """

    def __init__(self, neuron_counts: list[int], num_classes: int):
        if num_classes < 1:
            raise ValueError("num_classes must be positive")
        self.num_classes = num_classes
        self.neuron_counts = list(neuron_counts)
        self.offsets = np.concatenate([[0], np.cumsum(self.neuron_counts)]).astype(np.int64)
        total = int(self.offsets[-1])
        self.weights = np.zeros((total, num_classes), dtype=np.float64)
        self.reward_counts = np.zeros((total, num_classes), dtype=np.int64)

    def global_id(self, module: int, neuron: int) -> int:
        if not 0 <= neuron < self.neuron_counts[module]:
            raise IndexError(f"module {module} has no neuron {neuron}")
        return int(self.offsets[module]) + neuron

    def effective_weight(self, key: tuple[int, int, int], normalized: bool) -> float:
        """Link weight for (module, neuron, class); divided by the reward
        count (at least 1) in the normalized variant. Unknown keys read 0."""
        module, neuron, cls = key
        try:
            gid = self.global_id(module, neuron)
        except IndexError:
            return 0.0
        w = float(self.weights[gid, cls])
        if normalized:
            return w / max(1, int(self.reward_counts[gid, cls]))
        return w

    def effective_matrix(self, normalized: bool) -> np.ndarray:
        if normalized:
            return self.weights / np.maximum(1, self.reward_counts)
        return self.weights


@dataclass
class Prediction:
    class_index: int
    scores: np.ndarray  # per-class sums of effective link weights
    shift: int = 0  # the cyclic column shift that produced the best score


@dataclass
class TrainingLog:
    neuron_counts: list[int]
    epochs_run: int
    epoch_errors: list[int]
    train_seconds: float


class LamstarNetwork:
    """One SOM module per template column plus the decision layer."""

    def __init__(self, num_modules: int, subword_dim: int, num_classes: int,
                 config: LamstarConfig = LamstarConfig()):
        if num_modules < 1 or subword_dim < 1 or num_classes < 1:
            raise ValueError("num_modules, subword_dim and num_classes must be positive")
        self.num_modules = num_modules
        self.subword_dim = subword_dim
        self.num_classes = num_classes
        self.config = config
        self.modules = [SomModule(dim=subword_dim) for _ in range(num_modules)]
        self.decision: DecisionLayer | None = None
        self._packed: tuple[np.ndarray, np.ndarray] | None = None

    def _check_template(self, t: IrisTemplate) -> None:
        if t.radial_res != self.subword_dim or t.angular_res != self.num_modules:
            raise ValueError(
                f"template {t.radial_res}x{t.angular_res} does not match network "
                f"{self.subword_dim}x{self.num_modules}"
            )

    def _pack_modules(self) -> tuple[np.ndarray, np.ndarray]:
        """Neuron weights padded to (num_modules, max_n, dim) plus validity mask."""
        if self._packed is None:
            max_n = max(1, max(m.n_neurons for m in self.modules))
            packed = np.zeros((self.num_modules, max_n, self.subword_dim), dtype=np.float64)
            valid = np.zeros((self.num_modules, max_n), dtype=bool)
            for i, m in enumerate(self.modules):
                packed[i, : m.n_neurons] = m.weights
                valid[i, : m.n_neurons] = True
            self._packed = (packed, valid)
        return self._packed

    def _find_winners(self, subwords: np.ndarray, zero: np.ndarray) -> np.ndarray:
        """Global neuron id of the winner per module, -1 for abstentions."""
        packed, valid = self._pack_modules()
        dots = np.einsum("mnd,md->mn", packed, subwords)
        dots[~valid] = -np.inf
        winner = np.argmax(dots, axis=1)
        best = dots[np.arange(self.num_modules), winner]
        ok = (best >= self.config.winner_threshold) & ~zero
        gids = self.decision.offsets[:-1] + winner
        return np.where(ok, gids, -1)


def train(
    net: LamstarNetwork,
    templates: list[IrisTemplate],
    labels: list[int],
) -> TrainingLog:
    """Train the network: SOM phase first (dynamic neuron creation and
    winner pulling, one pass in presentation order), then the zeroed
    decision layer is adjusted by punishment/reward for up to
    config.epochs epochs, stopping early after an error-free epoch.
    """
    if len(templates) != len(labels):
        raise ValueError("templates and labels must have the same length")
    if not templates:
        raise ValueError("training set is empty")
    for label in labels:
        if not 0 <= label < net.num_classes:
            raise ValueError(f"label {label} outside [0, {net.num_classes})")
    for t in templates:
        net._check_template(t)
    cfg = net.config
    start = time.perf_counter()

    columns = []
    for t in templates:
        cols, zero = _subword_matrix(t.values)
        columns.append((cols, zero))

    # SOM phase: sequential over templates, dynamic creation per module.
    for cols, zero in columns:
        for m in range(net.num_modules):
            som_present(net.modules[m], Subword(cols[m], m, bool(zero[m])), cfg, learn=True)

    net.decision = DecisionLayer([m.n_neurons for m in net.modules], net.num_classes)
    net._packed = None

    # Winners are fixed once the SOM phase ends; resolve them once.
    winners = [net._find_winners(cols, zero) for cols, zero in columns]

    delta = cfg.delta
    weights = net.decision.weights
    counts = net.decision.reward_counts
    epoch_errors: list[int] = []
    epochs_run = 0
    for _ in range(cfg.epochs):
        errors = 0
        for gids, label in zip(winners, labels):
            active = gids[gids >= 0]
            if active.size:
                eff = weights[active]
                if cfg.normalized:
                    eff = eff / np.maximum(1, counts[active])
                scores = eff.sum(axis=0)
            else:
                scores = np.zeros(net.num_classes)
            if int(np.argmax(scores)) != label:
                errors += 1
            if active.size:
                if cfg.error_driven:
                    # Reward the true class only while its sum is not yet
                    # positive; punish a false class only while its sum is.
                    if scores[label] <= 0:
                        weights[active, label] += delta
                        counts[active, label] += 1
                    wrong = np.flatnonzero(scores > 0)
                    wrong = wrong[wrong != label]
                    for c in wrong:
                        weights[active, c] -= delta
                else:
                    weights[active, :] -= delta
                    weights[active, label] += 2 * delta
                    counts[active, label] += 1
        epoch_errors.append(errors)
        epochs_run += 1
        if errors == 0:
            break

    return TrainingLog(
        neuron_counts=[m.n_neurons for m in net.modules],
        epochs_run=epochs_run,
        epoch_errors=epoch_errors,
        train_seconds=time.perf_counter() - start,
    )


def classify(net: LamstarNetwork, t: IrisTemplate, shift_range: int = 0) -> Prediction:
    """Frozen-network classification; never mutates the network.

    Tries every cyclic column shift in [-shift_range, shift_range] and
    keeps the shift whose best class score is highest (first such shift in
    ascending order). Modules with no neuron above the winner threshold
    abstain. Ties in the final argmax go to the lowest class index.
    """
    if net.decision is None:
        raise ValueError("network has not been trained")
    net._check_template(t)
    eff = net.decision.effective_matrix(net.config.normalized)
    best_scores = None
    best_top = -np.inf
    best_shift = 0
    for shift in range(-shift_range, shift_range + 1):
        vals = np.roll(t.values, shift, axis=1) if shift else t.values
        cols, zero = _subword_matrix(vals)
        gids = net._find_winners(cols, zero)
        active = gids[gids >= 0]
        scores = eff[active].sum(axis=0) if active.size else np.zeros(net.num_classes)
        top = float(scores.max())
        if best_scores is None or top > best_top:
            best_scores, best_top, best_shift = scores, top, shift
    return Prediction(class_index=int(np.argmax(best_scores)), scores=best_scores, shift=best_shift)


def effective_weight(decision: DecisionLayer, key: tuple[int, int, int], normalized: bool) -> float:
    """Module-level convenience mirroring DecisionLayer.effective_weight."""
    return decision.effective_weight(key, normalized)


def save_model(net: LamstarNetwork, path: str | Path) -> None:
    """Write an LNS1 model file.

    Layout: ASCII header; per module a little-endian uint32 neuron count
    followed by the neuron weight vectors as little-endian float64; then
    sparse decision records (uint32 module, uint32 neuron, uint32 class,
    float64 weight, uint64 reward count) in key order for every link with
    a nonzero weight or reward count; then a uint64 record-count trailer.
    """
    if net.decision is None:
        raise ValueError("cannot save an untrained network")
    cfg = net.config
    parts = [
        f"LNS1 {net.num_modules} {net.subword_dim} {net.num_classes} "
        f"{1 if cfg.normalized else 0} {cfg.delta!r} {cfg.winner_threshold!r}\n".encode("ascii")
    ]
    for m in net.modules:
        parts.append(np.array(m.n_neurons, dtype="<u4").tobytes())
        parts.append(m.weights.astype("<f8").tobytes())
    dec = net.decision
    nonzero = np.argwhere((dec.weights != 0) | (dec.reward_counts != 0))
    record = np.dtype([("module", "<u4"), ("neuron", "<u4"), ("cls", "<u4"),
                       ("weight", "<f8"), ("rewards", "<u8")])
    records = np.zeros(len(nonzero), dtype=record)
    module_of = np.searchsorted(dec.offsets, nonzero[:, 0], side="right") - 1 if len(nonzero) else []
    for i, (gid, cls) in enumerate(nonzero):
        mod = int(module_of[i])
        records[i] = (mod, int(gid - dec.offsets[mod]), int(cls),
                      dec.weights[gid, cls], dec.reward_counts[gid, cls])
    parts.append(records.tobytes())
    parts.append(np.array(len(records), dtype="<u8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path: str | Path) -> LamstarNetwork:
    """Read an LNS1 model file back into an inference-ready network."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("missing LNS1 header line")
    parts = data[:nl].decode("ascii", "replace").split()
    if len(parts) != 7 or parts[0] != "LNS1":
        raise FormatError(f"bad LNS1 header: {data[:nl]!r}")
    num_modules, subword_dim, num_classes = int(parts[1]), int(parts[2]), int(parts[3])
    normalized = parts[4] == "1"
    cfg = LamstarConfig(normalized=normalized, delta=float(parts[5]),
                        winner_threshold=float(parts[6]))
    net = LamstarNetwork(num_modules, subword_dim, num_classes, cfg)
    pos = nl + 1
    for m in net.modules:
        n = int(np.frombuffer(data, dtype="<u4", count=1, offset=pos)[0])
        pos += 4
        nbytes = n * subword_dim * 8
        m.weights = (
            np.frombuffer(data, dtype="<f8", count=n * subword_dim, offset=pos)
            .reshape(n, subword_dim)
            .copy()
        )
        pos += nbytes
    net.decision = DecisionLayer([m.n_neurons for m in net.modules], num_classes)
    record = np.dtype([("module", "<u4"), ("neuron", "<u4"), ("cls", "<u4"),
                       ("weight", "<f8"), ("rewards", "<u8")])
    body = len(data) - pos - 8
    if body < 0 or body % record.itemsize:
        raise FormatError("malformed LNS1 decision-layer section")
    n_records = body // record.itemsize
    trailer = int(np.frombuffer(data, dtype="<u8", count=1, offset=len(data) - 8)[0])
    if trailer != n_records:
        raise FormatError(f"LNS1 trailer says {trailer} records, found {n_records}")
    records = np.frombuffer(data, dtype=record, count=n_records, offset=pos)
    for rec in records:
        gid = net.decision.global_id(int(rec["module"]), int(rec["neuron"]))
        net.decision.weights[gid, int(rec["cls"])] = float(rec["weight"])
        net.decision.reward_counts[gid, int(rec["cls"])] = int(rec["rewards"])
    return net
