"""Training engine: the per-epoch train / constrain / prune / regenerate loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from devosnn.config import ExperimentConfig, config_to_dict, dump_config, validate_config
from devosnn.console import print_epoch, print_muted, print_phase
from devosnn.constraint import SynapseBounds, apply_constraint, init_boundaries
from devosnn.data.dataset import Dataset, encode_batch
from devosnn.data.registry import SourceRegistry, create_default_registry
from devosnn.mask import StructureMask
from devosnn.metrics import METRICS_NAME, TIMING_NAME, EpochMetrics, append_metrics, append_timing, read_metrics
from devosnn.network import (
    Gradients,
    Model,
    Parameters,
    apply_mask,
    backward_pass,
    forward_pass,
    init_parameters,
    softmax_cross_entropy,
)
from devosnn.optim import AdamState, NonFiniteGradientError, optimizer_step
from devosnn.persistence import (
    CHECKPOINT_NAME,
    RunInfo,
    TrainingCheckpoint,
    checkpoint_save,
    cleanup_runs,
    complete_run,
    create_run,
    load_run_info,
    save_run_info,
)
from devosnn.pruning import (
    LayerCollapseError,
    PruneSchedule,
    compression_rate,
    neuron_importance,
    prunable_layers,
    prune_step,
    update_prune_rates,
)
from devosnn.regeneration import RegenState, regenerate_step, update_regen_rate
from devosnn.spec import NetworkSpec
from devosnn.states import TERMINAL, Event, Mechanism, Phase, transition

log = logging.getLogger(__name__)

EVAL_BATCH = 256


class TrainingAborted(RuntimeError):
    """Raised when a run stops before its last epoch; the last checkpoint is kept."""


def evaluate(model: Model, dataset: Dataset, batch_size: int = EVAL_BATCH) -> float:
    """Percent of samples whose argmax logit (lowest index on ties) is the label."""
    if len(dataset) == 0:
        return 0.0
    if dataset.sample_shape != tuple(model.spec.input_shape):
        raise ValueError(f"dataset samples are {dataset.sample_shape}, network expects {model.spec.input_shape}")
    correct = 0
    for inputs, labels in dataset.batches(batch_size):
        _, logits = forward_pass(model.spec, model.params, model.mask, encode_batch(inputs, model.spec.time_steps))
        correct += int((logits.argmax(axis=1) == labels).sum())
    return 100.0 * correct / len(dataset)


@dataclass
class TrainingContext:
    """Mutable training state passed through phase handlers."""

    config: ExperimentConfig
    spec: NetworkSpec
    run_dir: Path
    train_set: Dataset
    test_set: Dataset
    params: Parameters
    mask: StructureMask
    bounds: SynapseBounds
    schedule: PruneSchedule
    regen: RegenState
    adam: AdamState
    shuffle_rng: np.random.Generator
    w_prev: Parameters
    phase: Phase = Phase.TRAIN
    epoch: int = 0
    grad_sum: Gradients | None = None
    batch_count: int = 0
    loss_sum: float = 0.0
    correct: int = 0
    spike_sum: float = 0.0
    pruned_units: int = 0
    revived: int = 0
    test_acc: float = 0.0
    epoch_started: float = 0.0
    last_error: str = ""
    history: list[EpochMetrics] = field(default_factory=list)

    @property
    def model(self) -> Model:
        return Model(self.spec, self.params, self.mask)

    def reset_epoch(self) -> None:
        self.grad_sum = None
        self.batch_count = 0
        self.loss_sum = 0.0
        self.correct = 0
        self.spike_sum = 0.0
        self.pruned_units = 0
        self.revived = 0
        self.test_acc = 0.0
        self.epoch_started = time.perf_counter()


def load_datasets(
    config: ExperimentConfig, spec: NetworkSpec, registry: SourceRegistry | None = None
) -> tuple[Dataset, Dataset]:
    registry = registry or create_default_registry()
    source = registry.get(config.data.source)
    if source is None:
        raise ValueError(f"unknown data source {config.data.source!r}")
    datasets = []
    for split in ("train", "test"):
        ds = source.load(config.data, split)
        if ds.sample_shape != tuple(spec.input_shape):
            raise ValueError(f"{split} samples are {ds.sample_shape}, network expects {spec.input_shape}")
        if ds.temporal and ds.inputs.shape[1] != spec.time_steps:
            raise ValueError(f"{split} frames have {ds.inputs.shape[1]} steps, network expects {spec.time_steps}")
        datasets.append(ds)
    log.info("Data: %s (%d train / %d test samples)", source.name, len(datasets[0]), len(datasets[1]))
    return datasets[0], datasets[1]


class TrainingEngine:
    """Drives epochs from TRAIN through COMPLETED (or ABORTED)."""

    def __init__(
        self,
        config: ExperimentConfig,
        run_dir: Path | None = None,
        registry: SourceRegistry | None = None,
        datasets: tuple[Dataset, Dataset] | None = None,
        quiet: bool = False,
    ) -> None:
        spec = config.network_spec()
        if run_dir is None:
            run_dir = create_run(f"{config.train.mode}-{config.data.source}", config.output.runs_path)
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        train_set, test_set = datasets or load_datasets(config, spec, registry)

        seed = config.train.seed
        params = init_parameters(spec, np.random.default_rng([seed, 0]))
        mask = StructureMask.full(spec)
        self.ctx = TrainingContext(
            config=config,
            spec=spec,
            run_dir=run_dir,
            train_set=train_set,
            test_set=test_set,
            params=params,
            mask=mask,
            bounds=init_boundaries(params),
            schedule=config.prune_schedule(),
            regen=RegenState.initial(mask, config.regen.rho_g, config.regen.gamma, config.regen_t_num),
            adam=AdamState.zeros_like(params),
            shuffle_rng=np.random.default_rng([seed, 1]),
            w_prev=params.copy(),
        )
        self.mode = config.mode
        self.quiet = quiet
        self.info = load_run_info(run_dir) or RunInfo(run_id=run_dir.name)
        self.info.epochs = config.train.epochs
        self.info.mode = self.mode.value

        self._handlers: dict[Phase, Any] = {
            Phase.TRAIN: self._handle_train,
            Phase.CONSTRAIN: self._handle_constrain,
            Phase.PRUNE: self._handle_prune,
            Phase.REGENERATE: self._handle_regenerate,
            Phase.EVALUATE: self._handle_evaluate,
            Phase.RECORD: self._handle_record,
        }

    @property
    def metrics_path(self) -> Path:
        return self.ctx.run_dir / METRICS_NAME

    @property
    def checkpoint_path(self) -> Path:
        return self.ctx.run_dir / CHECKPOINT_NAME

    def run(self) -> Phase:
        """Run epochs until COMPLETED; raises TrainingAborted on ABORTED."""
        ctx = self.ctx
        dump_config(ctx.config, ctx.run_dir / "config.yaml")
        log.info(
            "Training %s for %d epochs (mode=%s, seed=%d, run=%s)",
            ctx.spec.architecture, ctx.config.train.epochs, self.mode.value, ctx.config.train.seed, ctx.run_dir,
        )
        if not self.quiet:
            print_phase(f"{ctx.spec.architecture}  mode={self.mode.value}")
            print_muted(f"pruning from epoch {ctx.schedule.start_epoch + 1}, slow phase after {ctx.schedule.mid_epoch}")
        ctx.reset_epoch()
        return self._loop()

    def resume(self, ckpt: TrainingCheckpoint) -> Phase:
        """Continue after the checkpointed epoch, appending to the same metrics file."""
        ctx = self.ctx
        if ckpt.config != config_to_dict(ctx.config):
            log.warning("Checkpoint config differs from the run config; continuing with the run config")
        ctx.params = ckpt.params
        ctx.mask = ckpt.mask
        ctx.bounds = ckpt.bounds
        ctx.schedule = ckpt.schedule
        ctx.regen = ckpt.regen
        ctx.adam = ckpt.adam
        ctx.shuffle_rng.bit_generator.state = ckpt.rng_state
        ctx.w_prev = ckpt.params.copy()
        ctx.epoch = ckpt.epoch + 1
        if self.metrics_path.exists():
            ctx.history = [m for m in read_metrics(self.metrics_path) if m.epoch <= ckpt.epoch]
        log.info("Resuming %s at epoch %d", ctx.run_dir, ctx.epoch)
        if ctx.epoch >= ctx.config.train.epochs:
            ctx.phase = Phase.COMPLETED
            self._finish()
            return ctx.phase
        ctx.phase = Phase.TRAIN
        ctx.reset_epoch()
        return self._loop()

    def _loop(self) -> Phase:
        ctx = self.ctx
        while ctx.phase not in TERMINAL:
            handler = self._handlers[ctx.phase]
            try:
                handler()
            except (NonFiniteGradientError, LayerCollapseError, FloatingPointError) as e:
                ctx.last_error = f"epoch {ctx.epoch}, {ctx.phase.name}: {e}"
                log.error("Aborting: %s", ctx.last_error)
                self._emit(Event.ERROR)
            self._persist()

        if ctx.phase == Phase.ABORTED:
            raise TrainingAborted(ctx.last_error)
        self._finish()
        return ctx.phase

    # -- Phase handlers --

    def _handle_train(self) -> None:
        """One pass of minibatch BPTT + Adam over the shuffled train split."""
        ctx = self.ctx
        steps = ctx.spec.time_steps
        for inputs, labels in ctx.train_set.batches(ctx.config.train.batch_size, ctx.shuffle_rng):
            states, logits = forward_pass(ctx.spec, ctx.params, ctx.mask, encode_batch(inputs, steps))
            loss, loss_grad = softmax_cross_entropy(logits, labels)
            if not np.isfinite(loss):
                raise NonFiniteGradientError(f"non-finite loss at batch {ctx.batch_count}")
            grads = backward_pass(ctx.spec, states, ctx.params, ctx.mask, loss_grad)
            ctx.params = optimizer_step(ctx.params, grads, ctx.mask, ctx.adam, ctx.config.adam_settings())

            magnitudes = [np.abs(g) for g in grads.weights]
            if ctx.grad_sum is None:
                ctx.grad_sum = Gradients(magnitudes, [np.zeros_like(b) for b in grads.biases])
            else:
                for total, m in zip(ctx.grad_sum.weights, magnitudes):
                    total += m
            size = len(labels)
            ctx.batch_count += 1
            ctx.loss_sum += loss * size
            ctx.correct += int((logits.argmax(axis=1) == labels).sum())
            ctx.spike_sum += states.spike_rate * size
            log.debug("epoch %d batch %d: loss=%.6f", ctx.epoch, ctx.batch_count, loss)
        self._emit(Event.DONE)

    def _handle_constrain(self) -> None:
        ctx = self.ctx
        if not self.mode.enables(Mechanism.CONSTRAINT):
            self._emit(Event.SKIPPED)
            return
        ctx.params, ctx.bounds = apply_constraint(ctx.params, ctx.w_prev, ctx.bounds, ctx.config.constraint, ctx.mask)
        self._emit(Event.DONE)

    def _handle_prune(self) -> None:
        ctx = self.ctx
        if not self.mode.enables(Mechanism.PRUNING) or ctx.epoch <= ctx.schedule.start_epoch:
            self._emit(Event.SKIPPED)
            return
        kinds = ctx.spec.kinds
        importance = [neuron_importance(ctx.bounds, ctx.mask, i) for i in prunable_layers(kinds)]
        before = ctx.mask
        ctx.mask = prune_step(importance, before, ctx.schedule, kinds)

        reprune = 0
        for i in prunable_layers(kinds):
            killed = before.unit_alive[i] & ~ctx.mask.unit_alive[i]
            if killed.any():
                ctx.adam.reset_units(i, killed)
                ctx.adam.reset_synapses(i, killed)
                ctx.pruned_units += int(killed.sum())
                reprune += int(before.syn_revived[i][killed].sum())
        ctx.params = apply_mask(ctx.params, ctx.mask)
        if ctx.pruned_units:
            log.info("epoch %d: pruned %d units (%d revived synapses pruned again)", ctx.epoch, ctx.pruned_units, reprune)

        ctx.schedule = update_prune_rates(ctx.schedule, ctx.epoch, ctx.mask.alive_unit_counts(), kinds)
        self._emit(Event.DONE)

    def _handle_regenerate(self) -> None:
        ctx = self.ctx
        if (
            not self.mode.enables(Mechanism.REGENERATION)
            or ctx.epoch <= ctx.schedule.start_epoch
            or ctx.grad_sum is None
        ):
            self._emit(Event.SKIPPED)
            return
        mean_grad = Gradients(
            [g / ctx.batch_count for g in ctx.grad_sum.weights],
            [b / ctx.batch_count for b in ctx.grad_sum.biases],
        )
        before = ctx.mask
        ctx.mask, ctx.regen = regenerate_step(mean_grad, before, ctx.regen)

        woken = 0
        for i in range(len(ctx.mask)):
            revived = ctx.mask.syn_alive[i] & ~before.syn_alive[i]
            if revived.any():
                ctx.adam.reset_synapses(i, revived)
                ctx.revived += int(revived.sum())
            units = ctx.mask.unit_alive[i] & ~before.unit_alive[i]
            if units.any():
                ctx.adam.reset_units(i, units)
                woken += int(units.sum())
        ctx.params = apply_mask(ctx.params, ctx.mask)
        if ctx.revived:
            log.info("epoch %d: revived %d synapses (%d units back alive)", ctx.epoch, ctx.revived, woken)

        ctx.regen = update_regen_rate(ctx.regen, ctx.epoch, ctx.schedule.start_epoch)
        self._emit(Event.DONE)

    def _handle_evaluate(self) -> None:
        self.ctx.test_acc = evaluate(self.ctx.model, self.ctx.test_set)
        self._emit(Event.DONE)

    def _handle_record(self) -> None:
        """Append the epoch's metrics, checkpoint, then advance or finish."""
        ctx = self.ctx
        seen = max(len(ctx.train_set), 1)
        schedule = ctx.schedule
        kinds = ctx.spec.kinds
        row = EpochMetrics(
            epoch=ctx.epoch,
            train_loss=ctx.loss_sum / seen,
            train_acc=100.0 * ctx.correct / seen,
            test_acc=ctx.test_acc,
            compression=compression_rate(ctx.mask, ctx.params),
            rho_conv=_kind_rate(schedule, kinds, "conv"),
            rho_fc=_kind_rate(schedule, kinds, "fc"),
            rho_g=ctx.regen.rho_g,
            revived=ctx.revived,
            pruned_units=ctx.pruned_units,
            spike_rate=ctx.spike_sum / seen,
            alive=ctx.mask.alive_unit_counts(),
        )
        append_metrics(row, self.metrics_path)
        append_timing(ctx.epoch, time.perf_counter() - ctx.epoch_started, ctx.run_dir / TIMING_NAME)
        ctx.history.append(row)
        ctx.w_prev = ctx.params.copy()
        checkpoint_save(self._checkpoint(), self.checkpoint_path)
        log.info(
            "epoch %d: loss=%.4f train=%.2f%% test=%.2f%% compression=%.2f%%",
            row.epoch, row.train_loss, row.train_acc, row.test_acc, row.compression,
        )
        if not self.quiet:
            print_epoch(row, ctx.config.train.epochs)

        if ctx.epoch + 1 >= ctx.config.train.epochs:
            self._emit(Event.FINISHED)
            return
        ctx.epoch += 1
        ctx.reset_epoch()
        self._emit(Event.NEXT_EPOCH)

    # -- Helpers --

    def _checkpoint(self) -> TrainingCheckpoint:
        ctx = self.ctx
        return TrainingCheckpoint(
            epoch=ctx.epoch,
            params=ctx.params,
            mask=ctx.mask,
            bounds=ctx.bounds,
            schedule=ctx.schedule,
            regen=ctx.regen,
            adam=ctx.adam,
            rng_state=ctx.shuffle_rng.bit_generator.state,
            config=config_to_dict(ctx.config),
        )

    def _emit(self, event: Event) -> None:
        old = self.ctx.phase
        self.ctx.phase = transition(old, event)
        log.debug("Transition: %s + %s -> %s", old.name, event.name, self.ctx.phase.name)

    def _persist(self) -> None:
        info = self.info
        info.status = self.ctx.phase.name
        info.epoch = self.ctx.history[-1].epoch if self.ctx.history else -1
        info.last_error = self.ctx.last_error
        try:
            save_run_info(info, self.ctx.run_dir)
        except OSError as e:
            log.warning("Failed to persist run info: %s", e)

    def _finish(self) -> None:
        ctx = self.ctx
        if ctx.history:
            last = ctx.history[-1]
            self.info.summary = {"test_acc": last.test_acc, "compression": last.compression}
        self.info.status = ctx.phase.name
        save_run_info(self.info, ctx.run_dir)
        complete_run(ctx.run_dir)
        runs_path = ctx.config.output.runs_path
        if ctx.run_dir.parent == runs_path:
            cleanup_runs(runs_path, ctx.config.output.max_runs)


def _kind_rate(schedule: PruneSchedule, kinds: list[str], kind: str) -> float:
    """Shared rate of ``kind``, or the mean per-layer rate in per-layer mode."""
    if schedule.per_layer:
        rates = [schedule.rate_for(i, kind) for i in prunable_layers(kinds) if kinds[i] == kind]
        if rates:
            return float(np.mean(rates))
    return schedule.rho_conv if kind == "conv" else schedule.rho_fc


@dataclass
class TrainingResult:
    model: Model
    metrics: list[EpochMetrics]
    run_dir: Path
    metrics_path: Path

    @property
    def test_acc(self) -> float:
        return self.metrics[-1].test_acc if self.metrics else 0.0

    @property
    def compression(self) -> float:
        return self.metrics[-1].compression if self.metrics else 0.0


def run_training(
    config: ExperimentConfig,
    run_dir: Path | None = None,
    datasets: tuple[Dataset, Dataset] | None = None,
    quiet: bool = False,
) -> TrainingResult:
    """Train end to end; returns the final model and the metrics written to disk.

    An invalid config raises ValueError before anything is written.
    """
    validate_config(config, check_files=datasets is None)
    engine = TrainingEngine(config, run_dir=run_dir, datasets=datasets, quiet=quiet)
    engine.run()
    ctx = engine.ctx
    return TrainingResult(ctx.model, list(ctx.history), ctx.run_dir, engine.metrics_path)
