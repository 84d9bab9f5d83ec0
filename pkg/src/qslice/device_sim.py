"""Transactional device agents.

Devices expose the configuration surface the orchestrator drives: ordered
transactions of set/delete commands against a slash-path config tree, applied
atomically with per-command latencies sampled from a per-kind model.  A
failing command aborts the candidate config, so nothing partial is ever
visible (the in-transaction revert is the device discarding its candidate,
not replayed commands, and costs no simulated time).

Fault injection covers the failure paths the orchestrator must survive:
``fail_next`` and ``fail_after_n`` are one-shot and consumed by the command
they kill; ``offline`` persists until cleared.
"""

from __future__ import annotations

import itertools
import logging
import random
import threading
from dataclasses import dataclass, field
from typing import Optional

from .clock import SimClock
from .config import LatencyParams
from .errors import DeviceError, TransactionError
from .topology import Device, Topology

log = logging.getLogger(__name__)

_txn_counter = itertools.count(1)


def next_txn_id(prefix: str = "txn") -> str:
    return f"{prefix}-{next(_txn_counter):06d}"


@dataclass(frozen=True)
class ConfigCommand:
    device_id: str
    op: str                      # set | delete
    path: str
    value: Optional[str] = None

    def __post_init__(self) -> None:
        if self.op == "set":
            if self.value is None:
                raise ValueError(f"set {self.path}: value required")
        elif self.op == "delete":
            if self.value is not None:
                raise ValueError(f"delete {self.path}: value must be absent")
        else:
            raise ValueError(f"unknown op '{self.op}'")


@dataclass
class ConfigTransaction:
    txn_id: str
    commands: list[ConfigCommand]
    status: str = "pending"      # pending -> committed | failed; failed -> rolled_back

    def mark(self, status: str) -> None:
        legal = {("pending", "committed"), ("pending", "failed"),
                 ("failed", "rolled_back")}
        if (self.status, status) not in legal:
            raise ValueError(f"txn {self.txn_id}: illegal {self.status} -> {status}")
        self.status = status


@dataclass(frozen=True)
class Ack:
    txn_id: str
    per_command_durations_s: list[float]

    @property
    def total_duration_s(self) -> float:
        return sum(self.per_command_durations_s)


class LatencyModel:
    """Per-command apply latency: constant value or lognormal seconds."""

    def __init__(self, model_id: str, params: LatencyParams):
        self.id = model_id
        self.params = params
        if params.distribution == "constant" and params.mu <= 0:
            raise ValueError(f"latency model {model_id}: constant value must be > 0")
        if params.distribution not in ("constant", "lognormal"):
            raise ValueError(f"latency model {model_id}: "
                             f"unknown distribution '{params.distribution}'")

    def sample(self, rng: random.Random) -> float:
        if self.params.distribution == "constant":
            return self.params.mu
        return rng.lognormvariate(self.params.mu, self.params.sigma)


@dataclass
class _FaultState:
    offline: bool = False
    fail_next: bool = False
    # commands still allowed to succeed before the one-shot failure fires
    fail_after_remaining: Optional[int] = None

    def should_fail_command(self) -> bool:
        """Consume one command attempt; True when this attempt must fail."""
        if self.fail_next:
            self.fail_next = False
            return True
        if self.fail_after_remaining is not None:
            if self.fail_after_remaining == 0:
                self.fail_after_remaining = None
                return True
            self.fail_after_remaining -= 1
        return False


class DeviceAgent:
    def __init__(self, device: Device, model: LatencyModel):
        self.device = device
        self.model = model
        self.faults = _FaultState()

    def check_online(self) -> None:
        if self.faults.offline:
            raise DeviceError(f"device {self.device.id} is offline", self.device.id)


class DeviceFabric:
    """All device agents plus the shared clock and RNG.

    Callers serialize transactions themselves (the orchestrator's global
    lock); the fabric only guards its own bookkeeping.
    """

    def __init__(self, topology: Topology, clock: SimClock,
                 latency: dict[str, LatencyParams], seed: int):
        self.topology = topology
        self.clock = clock
        self.rng = random.Random(seed)
        self._lock = threading.Lock()
        self._seen_txn_ids: set[str] = set()
        self.agents: dict[str, DeviceAgent] = {}
        for dev in topology.devices.values():
            params = latency.get(dev.kind)
            if params is None:
                raise DeviceError(f"no latency model for device kind '{dev.kind}'",
                                  dev.id)
            self.agents[dev.id] = DeviceAgent(dev, LatencyModel(dev.kind, params))

    def _agent(self, device_id: str) -> DeviceAgent:
        agent = self.agents.get(device_id)
        if agent is None:
            raise DeviceError(f"unknown device '{device_id}'", device_id)
        return agent

    def apply_transaction(self, txn: ConfigTransaction) -> Ack:
        with self._lock:
            if txn.txn_id in self._seen_txn_ids:
                raise TransactionError(f"duplicate txn_id '{txn.txn_id}'", txn.txn_id)
            self._seen_txn_ids.add(txn.txn_id)
        for cmd in txn.commands:
            self._agent(cmd.device_id)   # unknown device fails the whole txn upfront

        durations: list[float] = []
        # (tree, path, prior value or absent-marker) for candidate abort
        applied: list[tuple[dict[str, str], str, Optional[str], bool]] = []
        failure: Optional[TransactionError] = None

        for index, cmd in enumerate(txn.commands):
            agent = self.agents[cmd.device_id]
            try:
                agent.check_online()
            except DeviceError as exc:
                failure = TransactionError(str(exc), txn.txn_id, index, cmd.device_id)
                break
            durations.append(agent.model.sample(self.rng))
            if agent.faults.should_fail_command():
                failure = TransactionError(
                    f"injected fault on {cmd.device_id} at command {index}",
                    txn.txn_id, index, cmd.device_id)
                break
            tree = agent.device.config_tree
            if cmd.op == "set":
                applied.append((tree, cmd.path, tree.get(cmd.path), cmd.path in tree))
                tree[cmd.path] = cmd.value  # type: ignore[assignment]
            else:
                if cmd.path not in tree:
                    failure = TransactionError(
                        f"delete of unknown path '{cmd.path}' on {cmd.device_id}",
                        txn.txn_id, index, cmd.device_id)
                    break
                applied.append((tree, cmd.path, tree[cmd.path], True))
                del tree[cmd.path]

        # One pacing sleep per transaction keeps wall overhead proportional
        # to simulated time rather than to command count.
        self.clock.advance(sum(durations))

        if failure is not None:
            for tree, path, prior, existed in reversed(applied):
                if existed:
                    tree[path] = prior  # type: ignore[assignment]
                else:
                    tree.pop(path, None)
            txn.mark("failed")
            log.warning("txn %s failed at command %s on %s", txn.txn_id,
                        failure.command_index, failure.device_id)
            raise failure
        txn.mark("committed")
        return Ack(txn.txn_id, durations)

    def get_config(self, device_id: str, path_prefix: str = "") -> dict[str, str]:
        agent = self._agent(device_id)
        agent.check_online()
        return {p: v for p, v in agent.device.config_tree.items()
                if p.startswith(path_prefix)}

    def inject_fault(self, device_id: str, mode: str, n: Optional[int] = None) -> None:
        agent = self._agent(device_id)
        if mode == "fail_next":
            agent.faults.fail_next = True
        elif mode == "fail_after_n":
            if n is None or n < 0:
                raise DeviceError("fail_after_n requires n >= 0", device_id)
            agent.faults.fail_after_remaining = n
        elif mode == "offline":
            agent.faults.offline = True
        elif mode == "clear":
            agent.faults = _FaultState()
        else:
            raise DeviceError(f"unknown fault mode '{mode}'", device_id)
        log.info("fault %s injected on %s (n=%s)", mode, device_id, n)


def invert(command: ConfigCommand, prior_value: Optional[str]) -> ConfigCommand:
    """Command that restores the state ``command`` overwrote."""
    if command.op == "set":
        if prior_value is None:
            return ConfigCommand(command.device_id, "delete", command.path)
        return ConfigCommand(command.device_id, "set", command.path, prior_value)
    if prior_value is None:
        raise ValueError(f"cannot invert delete of '{command.path}': no prior value")
    return ConfigCommand(command.device_id, "set", command.path, prior_value)
