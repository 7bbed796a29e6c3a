"""Sequential Chicken pedestrian-vehicle interaction model."""

import json

from ._core import (
    Action,
    ConcurrentSubmitError,
    Equilibrium,
    EquilibriumKind,
    Error,
    FitFailure,
    Game,
    GameParams,
    OutOfRangeError,
    Outcome,
    ParseError,
    SequencingError,
    SessionFinishedError,
    UnknownSessionError,
    ValidationError,
    analyze_log,
    fit_ucrash,
    monte_carlo,
    sample_decisions,
    self_play_log,
)
from ._core import SessionStore as _SessionStore

DEFAULT_CRASH_GRID = (2.0, 3.0, 10.0, 100.0, 1e3, 1e4, 1e6)


class SessionStore:
    """Dict-friendly wrapper over the native session store."""

    def __init__(self, directory="", base_seed=0):
        self._store = _SessionStore(str(directory), base_seed)

    def create_session(self, config=None):
        return self._store.create_session(json.dumps(config or {}))

    def submit_action(self, session_id, action, turn=None):
        if isinstance(action, str):
            action = Action.__members__[action.upper()]
        return json.loads(self._store.submit_action(session_id, action, turn))

    def state(self, session_id):
        return json.loads(self._store.state(session_id))

    def export(self, session_ids=()):
        return self._store.export(list(session_ids))

    def session_ids(self):
        return self._store.session_ids()


def analyze(text, grid=DEFAULT_CRASH_GRID, ped_box=0.2):
    """Fit summary of a JSON-lines crossing log, as a dict."""
    return json.loads(analyze_log(text, list(grid), ped_box))
