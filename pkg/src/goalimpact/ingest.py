"""Event CSV parsing, derived features, play numbering and episode building.

Input files are UTF-8 CSVs with a header row. Column names follow the
vendor convention and can be remapped through a schema dict:

    GID, PID, GT, TID, X, Y, MP, GD, Action, OC, P, H/A

All coordinates are assumed to arrive already adjusted (negative x = the
acting player's defensive zone); the parser does not re-derive period
flips.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence as TSequence, Union

import numpy as np

from .errors import RowParseError, SchemaError
from .events import (
    ActionVocabulary,
    DEFAULT_VOCABULARY,
    Event,
    FeatureScaler,
    Manpower,
    NEITHER,
    Observation,
    Outcome,
    TeamSide,
    encode_step,
    encoding_width,
    fit_scaler,
    goal_angle,
    goal_vector,
)

GAME_SECONDS = 3600.0
MAX_TRACE = 10

#: canonical field -> default CSV column name
DEFAULT_SCHEMA = {
    "game_id": "GID",
    "player_id": "PID",
    "game_time": "GT",
    "team_id": "TID",
    "x": "X",
    "y": "Y",
    "manpower": "MP",
    "score_diff": "GD",
    "action": "Action",
    "outcome": "OC",
    "possession": "P",
    "side": "H/A",
}

_MANPOWER_NAMES = {
    "EV": Manpower.EV,
    "EVEN": Manpower.EV,
    "SH": Manpower.SH,
    "SHORTHANDED": Manpower.SH,
    "PP": Manpower.PP,
    "POWERPLAY": Manpower.PP,
}

_SIDE_NAMES = {"H": TeamSide.HOME, "HOME": TeamSide.HOME, "A": TeamSide.AWAY, "AWAY": TeamSide.AWAY}


@dataclass
class Episode:
    """Maximal goal-free span of one game's events, goal event inclusive."""

    game_id: int
    events: List[Event]
    terminal: Union[TeamSide, str]  # scoring side or NEITHER


@dataclass
class Sequence:
    """Per-episode training material: encoded steps plus bookkeeping.

    ``steps[t]`` encodes event t; a model window at t covers steps
    ``t - tl[t] + 1 .. t``. ``raw`` keeps the unscaled continuous features
    for tabular baselines.
    """

    game_id: int
    steps: np.ndarray          # [T, W] float64, encoded
    raw: np.ndarray            # [T, 8] float64, unscaled continuous
    tl: np.ndarray             # [T] int64 trace lengths in [1, MAX_TRACE]
    player_ids: np.ndarray     # [T] int64
    action_idx: np.ndarray     # [T] int64
    sides: np.ndarray          # [T] int8, +1 home / -1 away (acting team)
    possession: np.ndarray     # [T] int8, +1 home / -1 away
    manpower_idx: np.ndarray   # [T] int8 (acting team's manpower)
    game_time: np.ndarray      # [T] float64
    terminal: Union[TeamSide, str]

    def __len__(self) -> int:
        return self.steps.shape[0]

    @property
    def goal(self) -> np.ndarray:
        return goal_vector(self.terminal)


def _parse_side(raw: str, field: str, path, line) -> TeamSide:
    try:
        return _SIDE_NAMES[raw.strip().upper()]
    except KeyError:
        raise RowParseError(f"bad {field} value {raw!r}", path, line) from None


def parse_events(
    path,
    schema: Optional[Dict[str, str]] = None,
    strict: bool = True,
) -> Dict[int, List[Event]]:
    """Read an event CSV into typed events grouped by game.

    Events within a game are sorted by game_time (stable, so file order
    breaks ties). In strict mode a malformed row aborts with its line
    number; in lenient mode it is skipped with a warning on stderr.
    """
    schema = dict(DEFAULT_SCHEMA if schema is None else schema)
    missing_keys = set(DEFAULT_SCHEMA) - set(schema)
    if missing_keys:
        raise SchemaError(f"schema map missing canonical fields: {sorted(missing_keys)}")

    games: Dict[int, List[Event]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, expected a header row")
        missing = [col for col in schema.values() if col not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing required columns {missing}")
        for line, row in enumerate(reader, start=2):
            try:
                ev = _parse_row(row, schema, path, line)
            except RowParseError as err:
                if strict:
                    raise
                print(f"warning: skipping row: {err}", file=sys.stderr)
                continue
            games.setdefault(ev.game_id, []).append(ev)

    for evs in games.values():
        evs.sort(key=lambda e: e.game_time)  # stable: ties keep file order
    return dict(sorted(games.items()))


def _parse_row(row, schema: Dict[str, str], path, line) -> Event:
    def get(field: str) -> str:
        value = row.get(schema[field])
        if value is None:
            raise RowParseError(f"missing value for column {schema[field]!r}", path, line)
        return value

    def num(field: str, cast) -> float:
        raw = get(field)
        try:
            return cast(raw)
        except ValueError:
            raise RowParseError(
                f"cannot parse {schema[field]}={raw!r} as {cast.__name__}", path, line
            ) from None

    mp_raw = get("manpower").strip().upper()
    if mp_raw not in _MANPOWER_NAMES:
        raise RowParseError(f"bad manpower value {get('manpower')!r}", path, line)
    oc_raw = get("outcome").strip().upper()
    if oc_raw not in ("S", "F"):
        raise RowParseError(f"bad outcome value {get('outcome')!r}", path, line)

    side = _parse_side(get("side"), "H/A", path, line)
    action = get("action").strip().lower()
    if not action:
        raise RowParseError("empty action name", path, line)

    obs = Observation(
        x=num("x", float),
        y=num("y", float),
        score_diff=num("score_diff", float),
        manpower=_MANPOWER_NAMES[mp_raw],
        outcome=Outcome.SUCCESS if oc_raw == "S" else Outcome.FAILURE,
        side=side,
    )
    return Event(
        game_id=int(num("game_id", float)),
        player_id=int(num("player_id", float)),
        team_id=int(num("team_id", float)),
        game_time=num("game_time", float),
        action=action,
        obs=obs,
        possession=_parse_side(get("possession"), "P", path, line),
        goal_flag=side if action == "goal" else None,
    )


def derive_features(events: List[Event]) -> List[Event]:
    """Fill time_remain, duration, angle and velocity for one game in place.

    Velocity uses the previous event's coordinates rotated into the current
    actor's adjusted frame (180 degrees when the acting sides differ) and is
    (0, 0) at the first event of a game or when the duration is zero.
    """
    prev: Optional[Event] = None
    for ev in events:
        o = ev.obs
        duration = 0.0 if prev is None else ev.game_time - prev.game_time
        if prev is None or duration <= 0.0:
            vx = vy = 0.0
        else:
            px, py = prev.obs.x, prev.obs.y
            if prev.obs.side is not o.side:
                px, py = -px, -py
            vx = (o.x - px) / duration
            vy = (o.y - py) / duration
        ev.obs = Observation(
            x=o.x,
            y=o.y,
            vx=vx,
            vy=vy,
            time_remain=max(0.0, GAME_SECONDS - ev.game_time),
            score_diff=o.score_diff,
            manpower=o.manpower,
            duration=duration,
            outcome=o.outcome,
            angle=goal_angle(o.x, o.y),
            side=o.side,
        )
        prev = ev
    return events


def assign_play_numbers(events: List[Event]) -> List[Event]:
    """Number plays within one game: +1 whenever possession changes."""
    play = 1
    prev_possession = None
    for ev in events:
        if prev_possession is not None and ev.possession is not prev_possession:
            play += 1
        ev.play_number = play
        prev_possession = ev.possession
    return events


def segment_episodes(events: List[Event]) -> List[Episode]:
    """Split one game at goal events (inclusive); terminal side per episode.

    The concatenation of the returned episodes is exactly the input. A game
    whose last event is a goal produces no empty trailing episode.
    """
    if not events:
        return []
    game_id = events[0].game_id
    episodes: List[Episode] = []
    current: List[Event] = []
    for ev in events:
        current.append(ev)
        if ev.goal_flag is not None:
            episodes.append(Episode(game_id=game_id, events=current, terminal=ev.goal_flag))
            current = []
    if current:
        episodes.append(Episode(game_id=game_id, events=current, terminal=NEITHER))
    return episodes


def compute_trace_lengths(episode: Episode, max_trace: int = MAX_TRACE) -> np.ndarray:
    """Steps back to the start of the current play, capped, episode-local."""
    tl = np.ones(len(episode.events), dtype=np.int64)
    for t in range(1, len(episode.events)):
        if episode.events[t].play_number != episode.events[t - 1].play_number:
            tl[t] = 1
        else:
            tl[t] = min(max_trace, tl[t - 1] + 1)
    return tl


def build_sequences(
    episodes: TSequence[Episode],
    scaler: FeatureScaler,
    vocabulary: ActionVocabulary = DEFAULT_VOCABULARY,
) -> List[Sequence]:
    """Encode episodes into per-step vectors with trace lengths."""
    out = []
    width = encoding_width(vocabulary)
    for ep in episodes:
        n = len(ep.events)
        if n == 0:
            continue
        steps = np.empty((n, width), dtype=np.float64)
        raw = np.empty((n, 8), dtype=np.float64)
        player_ids = np.empty(n, dtype=np.int64)
        action_idx = np.empty(n, dtype=np.int64)
        sides = np.empty(n, dtype=np.int8)
        possession = np.empty(n, dtype=np.int8)
        manpower_idx = np.empty(n, dtype=np.int8)
        game_time = np.empty(n, dtype=np.float64)
        for t, ev in enumerate(ep.events):
            steps[t] = encode_step(ev, scaler, vocabulary)
            raw[t] = ev.obs.continuous()
            player_ids[t] = ev.player_id
            action_idx[t] = vocabulary.index(ev.action)
            sides[t] = 1 if ev.obs.side is TeamSide.HOME else -1
            possession[t] = 1 if ev.possession is TeamSide.HOME else -1
            manpower_idx[t] = ev.obs.manpower.value
            game_time[t] = ev.game_time
        out.append(
            Sequence(
                game_id=ep.game_id,
                steps=steps,
                raw=raw,
                tl=compute_trace_lengths(ep),
                player_ids=player_ids,
                action_idx=action_idx,
                sides=sides,
                possession=possession,
                manpower_idx=manpower_idx,
                game_time=game_time,
                terminal=ep.terminal,
            )
        )
    return out


def ingest_csv(
    path,
    schema: Optional[Dict[str, str]] = None,
    vocabulary: ActionVocabulary = DEFAULT_VOCABULARY,
    strict: bool = True,
):
    """parse -> derive -> number plays -> segment -> fit scaler -> encode.

    Returns (sequences, scaler). The scaler is fitted on the full ingested
    stream (population statistics).
    """
    games = parse_events(path, schema=schema, strict=strict)
    episodes: List[Episode] = []
    all_events: List[Event] = []
    for game_id in games:
        evs = assign_play_numbers(derive_features(games[game_id]))
        all_events.extend(evs)
        episodes.extend(segment_episodes(evs))
    scaler = fit_scaler(all_events)
    return build_sequences(episodes, scaler, vocabulary), scaler
