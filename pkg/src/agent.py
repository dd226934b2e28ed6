"""
Traveler agents: profiles, per-route experience memory (EWMATT) and the
non-LLM deciders (perfectly rational, multinomial logit, uniform random).

Agent state is immutable; `update_memory` returns a new AgentState so
decisions within a day always read a consistent snapshot.
"""

from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
from scipy.special import softmax

from src.errors import ConfigError
from src.network import OD

PROJECT_ROOT = Path(__file__).resolve().parents[1]
VOCABULARY_PATH = PROJECT_ROOT / "data" / "profiles" / "profile_vocabulary.txt"

DECIDER_KINDS = ("llm", "mnl", "prc", "random", "mock")
FEEDBACK_MODES = ("chosen", "all")
MOCK_POLICIES = ("argmin", "epsilon_greedy", "cyclic")
PROFILE_FIELDS = (
    "gender",
    "age_bracket",
    "income_level",
    "occupation",
    "education",
    "risk_preference",
    "trip_purpose",
)


class MemoryUpdateError(ValueError):
    """Inconsistent memory update (route out of range or chosen route not observed)."""


# --------------------------------------------------------------------------
# PROFILES
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Vocabulary:
    first_names: Tuple[str, ...]
    last_names: Tuple[str, ...]
    fields: Mapping[str, Tuple[str, ...]]
    traits: Tuple[Tuple[str, str], ...]

    def options(self, name: str) -> Tuple[str, ...]:
        return self.fields[name]


@lru_cache(maxsize=None)
def load_vocabulary(filepath: Union[str, Path] = VOCABULARY_PATH) -> Vocabulary:
    """Parse the profile vocabulary asset."""
    path = Path(filepath)
    if not path.exists():
        raise ValueError(f"File not found: {path}")

    fields: Dict[str, Tuple[str, ...]] = {}
    traits = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'field: values'")
        key = key.strip()
        if key == "trait":
            poles = tuple(p.strip() for p in value.split("/"))
            if len(poles) != 2:
                raise ConfigError(f"{path}:{lineno}: a trait needs exactly two poles")
            traits.append(poles)
        else:
            fields[key] = tuple(v.strip() for v in value.split("|") if v.strip())

    missing = [name for name in PROFILE_FIELDS + ("first_name", "last_name") if name not in fields]
    if missing or len(traits) != 5:
        raise ConfigError(f"{path}: incomplete vocabulary (missing {missing}, {len(traits)} trait axes)")

    return Vocabulary(
        first_names=fields.pop("first_name"),
        last_names=fields.pop("last_name"),
        fields=fields,
        traits=tuple(traits),
    )


@dataclass(frozen=True)
class Profile:
    name: str
    gender: str
    age_bracket: str
    income_level: str
    occupation: str
    education: str
    risk_preference: str
    trip_purpose: str
    traits: Tuple[str, ...]
    selfish: bool = False


def sample_profile(seed: int, selfish: bool = False, vocabulary: Optional[Vocabulary] = None) -> Profile:
    """Draw every profile field uniformly from the vocabulary; deterministic in `seed`."""
    vocab = vocabulary or load_vocabulary()
    rng = np.random.default_rng(seed)

    def pick(options):
        return options[int(rng.integers(len(options)))]

    name = f"{pick(vocab.first_names)} {pick(vocab.last_names)}"
    values = {name_: pick(vocab.options(name_)) for name_ in PROFILE_FIELDS}
    traits = tuple(axis[int(rng.integers(2))] for axis in vocab.traits)
    return Profile(name=name, traits=traits, selfish=selfish, **values)


def describe_profile(profile: Profile) -> str:
    traits = ", ".join(profile.traits[:-1]) + f", and {profile.traits[-1]}"
    text = (
        f"Your name is {profile.name}. "
        f"You are a {profile.gender} character, aged {profile.age_bracket}, "
        f"with a {profile.income_level} income level, {profile.occupation}, "
        f"with {profile.education}, {profile.risk_preference}, "
        f"and traveling for {profile.trip_purpose}. "
        f"You are a character who is {traits}."
    )
    if profile.selfish:
        text += " You are selfish."
    return text


# --------------------------------------------------------------------------
# MEMORY
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RouteMemory:
    chosen_count: int = 0
    ewmatt: Optional[float] = None
    last_observed_time: Optional[float] = None


@dataclass(frozen=True)
class Yesterday:
    choice: int
    observed_times: Mapping[int, float]
    bonus: float = 0.0


@dataclass(frozen=True)
class AgentState:
    """
    One decision-making agent. `weight` is the number of travelers it
    represents; `days` counts the days it has experienced so far.
    """

    id: int
    od: OD
    profile: Profile
    memories: Tuple[RouteMemory, ...]
    free_flow_times: Tuple[float, ...]
    weight: int = 1
    yesterday: Optional[Yesterday] = None
    cumulative_bonus: float = 0.0
    rng_seed: int = 0
    days: int = 0

    def __post_init__(self):
        if len(self.memories) != len(self.free_flow_times):
            raise ValueError("memories and free_flow_times must have one entry per route")
        if self.yesterday is not None and not 0 <= self.yesterday.choice < len(self.memories):
            raise ValueError(f"yesterday's choice {self.yesterday.choice} out of range")
        if self.weight < 1:
            raise ValueError(f"agent weight must be >= 1, got {self.weight}")

    @property
    def route_count(self) -> int:
        return len(self.memories)


def new_agent(
    agent_id: int,
    od: OD,
    free_flow_times: Tuple[float, ...],
    weight: int,
    rng_seed: int,
    profile: Profile,
) -> AgentState:
    return AgentState(
        id=agent_id,
        od=od,
        profile=profile,
        memories=tuple(RouteMemory() for _ in free_flow_times),
        free_flow_times=tuple(free_flow_times),
        weight=weight,
        rng_seed=rng_seed,
    )


def ewmatt_update(prev: Optional[float], observed: float, omega: float) -> float:
    """Exponentially weighted moving average; the first observation initializes it."""
    if not 0 < omega <= 1:
        raise ConfigError(f"omega must be in (0, 1], got {omega}")
    if observed < 0:
        raise ValueError(f"Observed travel time must be >= 0, got {observed}")
    if prev is None:
        return float(observed)
    return omega * observed + (1 - omega) * prev


def update_memory(
    state: AgentState,
    chosen: int,
    observed_times: Mapping[int, float],
    bonus: float,
    omega: float,
) -> AgentState:
    n = state.route_count
    if not 0 <= chosen < n:
        raise MemoryUpdateError(f"Agent {state.id}: chosen route {chosen} out of range 0..{n - 1}")
    if chosen not in observed_times:
        raise MemoryUpdateError(f"Agent {state.id}: no observation for chosen route {chosen}")

    memories = list(state.memories)
    for index, observed in sorted(observed_times.items()):
        if not 0 <= index < n:
            raise MemoryUpdateError(f"Agent {state.id}: observation for unknown route {index}")
        memory = memories[index]
        memories[index] = replace(
            memory,
            ewmatt=ewmatt_update(memory.ewmatt, observed, omega),
            last_observed_time=float(observed),
        )
    memories[chosen] = replace(memories[chosen], chosen_count=memories[chosen].chosen_count + 1)

    return replace(
        state,
        memories=tuple(memories),
        yesterday=Yesterday(choice=chosen, observed_times=dict(observed_times), bonus=bonus),
        cumulative_bonus=state.cumulative_bonus + bonus,
        days=state.days + 1,
    )


def compute_bonus(travel_time: float, bonus_rate: float, reference_time: float) -> float:
    return round(bonus_rate * max(0.0, reference_time - travel_time), 2)


# --------------------------------------------------------------------------
# DECIDERS
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeciderConfig:
    kind: str = "mnl"
    alpha: float = 1.0
    omega: float = 0.2
    feedback_mode: str = "all"
    mock_policy: str = "argmin"
    epsilon: float = 0.1

    def __post_init__(self):
        if self.kind not in DECIDER_KINDS:
            raise ConfigError(f"Unknown decider '{self.kind}'; expected one of {DECIDER_KINDS}")
        if not 0 < self.omega <= 1:
            raise ConfigError(f"omega must be in (0, 1], got {self.omega}")
        if self.kind == "mnl" and not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0 for the mnl decider, got {self.alpha}")
        if self.feedback_mode not in FEEDBACK_MODES:
            raise ConfigError(f"feedback_mode must be one of {FEEDBACK_MODES}, got '{self.feedback_mode}'")
        if self.mock_policy not in MOCK_POLICIES:
            raise ConfigError(f"mock_policy must be one of {MOCK_POLICIES}, got '{self.mock_policy}'")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError(f"epsilon must be in [0, 1], got {self.epsilon}")


def parse_decider_name(name: str) -> Dict[str, object]:
    """
    Map a command-line decider name to DeciderConfig fields:
    `mnl-0.3` sets alpha, `mock-epsilon` and `mock-cyclic` pick a mock policy.
    """
    name = name.strip().lower()
    if name.startswith("mnl-"):
        try:
            return {"kind": "mnl", "alpha": float(name[4:])}
        except ValueError:
            raise ConfigError(f"Cannot read alpha from decider name '{name}'") from None
    if name == "mock-epsilon":
        return {"kind": "mock", "mock_policy": "epsilon_greedy"}
    if name == "mock-cyclic":
        return {"kind": "mock", "mock_policy": "cyclic"}
    if name in DECIDER_KINDS:
        return {"kind": name}
    raise ConfigError(f"Unknown decider '{name}'")


def perceived_costs(state: AgentState) -> np.ndarray:
    """EWMATT per route; routes never observed fall back to their free-flow time."""
    return np.array(
        [
            memory.ewmatt if memory.ewmatt is not None else free_flow
            for memory, free_flow in zip(state.memories, state.free_flow_times)
        ],
        dtype=float,
    )


def greedy_choice(costs: np.ndarray, current: Optional[int]) -> int:
    """Cheapest route; stays on `current` when it ties for cheapest, else lowest index."""
    best = int(np.argmin(costs))
    if current is not None and costs[current] <= costs[best]:
        return current
    return best


def prc_choose(state: AgentState) -> int:
    costs = perceived_costs(state)
    current = state.yesterday.choice if state.yesterday is not None else None
    return greedy_choice(costs, current)


def mnl_probabilities(costs: np.ndarray, alpha: float) -> np.ndarray:
    return softmax(-alpha * np.asarray(costs, dtype=float))


def mnl_choose(state: AgentState, alpha: float, rng: np.random.Generator) -> int:
    probabilities = mnl_probabilities(perceived_costs(state), alpha)
    return int(rng.choice(state.route_count, p=probabilities))


def random_choose(state: AgentState, rng: np.random.Generator) -> int:
    return int(rng.integers(state.route_count))


@dataclass(frozen=True)
class Decision:
    """One day's route choice; `reason` and `transcript` are filled by the LLM decider."""

    choice: int
    reason: Optional[str] = None
    fallback: bool = False
    transcript: Tuple[Dict[str, object], ...] = ()
