"""HTTP/JSON session service for interactive expert-guided runs.

Each session is a single-writer state machine: requests against one session
apply in arrival order under its lock, while distinct sessions proceed
independently. Candidate proposal and explanation run off the request path;
the session reports ``evaluating`` until the next pair is ready. Every
mutation persists the session to disk, so a browser refresh or a server
restart loses nothing.

Endpoints:
    POST   /sessions                     create
    GET    /sessions/{id}                state
    POST   /sessions/{id}/preferences    submit preference labels
    GET    /sessions/{id}/candidates     current pair + explanations
    POST   /sessions/{id}/choice         {"side": "first"|"second"}
    GET    /sessions/{id}/heatmap        ?d1=&d2=&res=
    DELETE /sessions/{id}                abort
"""
from __future__ import annotations

import argparse
import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..acquisition import DecaySchedule, EiConfig, propose_pair
from ..errors import ConfigError, ExpertBoError, PhaseError, SessionNotFound
from ..explain import explain_candidates, slice_heatmap, suggest_dims
from ..families import load_family, task_from_json, task_to_json
from ..preference import (
    Hypothesis,
    PreferenceDataset,
    augment_skew,
    fit_preference_model,
    sample_pair,
)
from ..surrogate import load_model
from ..tasks import TaskDataset, evaluate, simple_regret
from .loop import (
    PrefConfig,
    SessionConfig,
    SimulatedChoiceOracle,
    derive_seed,
    initial_context,
    resolve_hypothesis,
)
from .records import STEP_SEED_BASE

API_VERSION = 1

ELICITING = "eliciting_preferences"
AWAITING = "awaiting_choice"
EVALUATING = "evaluating"
DONE = "done"
ABORTED = "aborted"


class CreateSessionRequest(BaseModel):
    family_path: str
    checkpoint_path: str
    task_id: Optional[str] = None
    expert_mode: str = "interactive"
    m_pairs: int = Field(default=10, ge=1)
    hypothesis_kind: Optional[str] = "expert"
    hypothesis_boxes: Optional[list] = None  # explicit boxes override the kind
    budget: int = Field(default=10, ge=1)
    initial: int = Field(default=1, ge=1)
    gamma: float = 0.1
    zeta: float = 0.1
    sigma_pref: float = float(np.sqrt(0.1))
    seed: int = 0
    acq: str = "ei"
    explanations: bool = True


class PreferenceLabels(BaseModel):
    labels: list[int]


class ChoiceRequest(BaseModel):
    side: str


class Session:
    """One interactive (or simulated) optimization session."""

    def __init__(self, sid: str, cfg: SessionConfig, expert_mode: str, store: "SessionStore"):
        self.sid = sid
        self.cfg = cfg
        self.expert_mode = expert_mode
        self.store = store
        self.lock = threading.Lock()
        self.phase = ELICITING
        self.t = 0
        self.context = TaskDataset.empty(cfg.task.task_id, cfg.task.space.dims)
        self.hypothesis: Optional[Hypothesis] = None
        self.pref_pairs: list = []
        self.pref_labels: list = []
        self.pref_model = None
        self.current: Optional[dict] = None
        self.history: list = []
        self.error: Optional[str] = None

    # ---- lifecycle -------------------------------------------------------

    def start(self):
        self.context = initial_context(self.cfg)
        self.hypothesis = resolve_hypothesis(self.cfg)
        rng = np.random.default_rng(derive_seed(self.cfg.seed, 3))
        self.pref_pairs = [
            sample_pair(self.hypothesis, rng) for _ in range(self.cfg.pref.m_pairs)
        ]
        if self.expert_mode == "simulated":
            oracle = SimulatedChoiceOracle(
                self.cfg.task, self.cfg.sigma_pref, derive_seed(self.cfg.seed, 4)
            )
            self.pref_labels = [oracle.label(a, b) for a, b in self.pref_pairs]
            self._fit_preferences()
            self._compute_pair_locked()
        self.persist()

    def _fit_preferences(self):
        d = self.cfg.task.space.dims
        dataset = PreferenceDataset(
            np.asarray([p[0] for p in self.pref_pairs]).reshape(-1, d),
            np.asarray([p[1] for p in self.pref_pairs]).reshape(-1, d),
            np.asarray(self.pref_labels, dtype=int),
            tuple(
                "simulated" if self.expert_mode == "simulated" else "human"
                for _ in self.pref_labels
            ),
        )
        self.pref_dataset = dataset
        self.pref_model = fit_preference_model(augment_skew(dataset))

    def _build_pair(self, t: int, context: TaskDataset, pref_model) -> dict:
        step_seed = derive_seed(self.cfg.seed, STEP_SEED_BASE + t)
        pair = propose_pair(
            self.cfg.model,
            pref_model,
            context,
            self.cfg.task.space,
            DecaySchedule(self.cfg.gamma, t),
            EiConfig(self.cfg.zeta),
            self.cfg.search,
            seed=step_seed,
            acq=self.cfg.acq,
        )
        bundle = None
        if self.cfg.explanations:
            bundle = explain_candidates(
                pair,
                context,
                self.cfg.model,
                pref_model,
                self.cfg.task.space,
                DecaySchedule(self.cfg.gamma, t),
                EiConfig(self.cfg.zeta),
                seed=derive_seed(self.cfg.seed, 1000 + t),
                mc_seed=step_seed,
                acq=self.cfg.acq,
            )
        return {
            "step": t,
            "pair": pair.to_json(),
            "explanations": bundle.to_json() if bundle else None,
        }

    def _compute_pair_locked(self):
        """Synchronous proposal, used at simulated-session creation."""
        self.current = self._build_pair(self.t, self.context, self.pref_model)
        self.phase = AWAITING

    def _propose_async(self):
        """Heavy proposal work runs off the request path without the lock."""
        self.phase = EVALUATING
        self.persist()

        def work():
            try:
                with self.lock:
                    if self.phase != EVALUATING:
                        return
                    t, context, pref_model = self.t, self.context, self.pref_model
                current = self._build_pair(t, context, pref_model)
                with self.lock:
                    if self.phase == EVALUATING and self.t == t:
                        self.current = current
                        self.phase = AWAITING
                        self.persist()
            except Exception as exc:  # surfaced through the state endpoint
                with self.lock:
                    self.error = f"{type(exc).__name__}: {exc}"
                    self.phase = ABORTED
                    self.persist()

        self.store.pool.submit(work)

    # ---- request handlers (store holds the session lock) ------------------

    def submit_labels(self, labels: list[int]):
        if self.phase != ELICITING:
            raise PhaseError(f"labels not accepted in phase {self.phase}")
        remaining = self.cfg.pref.m_pairs - len(self.pref_labels)
        if len(labels) > remaining:
            raise PhaseError(f"got {len(labels)} labels but only {remaining} pairs remain")
        self.pref_labels.extend(int(bool(v)) for v in labels)
        if len(self.pref_labels) == self.cfg.pref.m_pairs:
            self._fit_preferences()
            self._propose_async()
        else:
            self.persist()

    def choose(self, side: str):
        if self.phase != AWAITING:
            raise PhaseError(f"choice not accepted in phase {self.phase}")
        if side not in ("first", "second"):
            raise PhaseError(f"side must be 'first' or 'second', got {side!r}")
        pair = self.current["pair"]
        x = np.asarray(pair["x1"] if side == "first" else pair["x2"], dtype=float)
        y = evaluate(self.cfg.task, x)
        self.context = self.context.with_observation(x, y)
        self.history.append(
            {"step": self.t, "side": side, "x": x.tolist(), "y": y, "pair": pair}
        )
        self.t += 1
        self.current = None
        if self.t >= self.cfg.budget:
            self.phase = DONE
            self.persist()
        else:
            self._propose_async()

    def abort(self):
        if self.phase not in (DONE, ABORTED):
            self.phase = ABORTED
        self.persist()

    # ---- views ------------------------------------------------------------

    def regret(self) -> Optional[list]:
        if self.cfg.task.known_optimum is None or len(self.context) == 0:
            return None
        return simple_regret(self.cfg.task, self.context).tolist()

    def state_json(self) -> dict:
        space = self.cfg.task.space
        pending = None
        if self.phase == ELICITING and len(self.pref_labels) < len(self.pref_pairs):
            a, b = self.pref_pairs[len(self.pref_labels)]
            pending = {"x1": a.tolist(), "x2": b.tolist()}
        return {
            "api_version": API_VERSION,
            "id": self.sid,
            "phase": self.phase,
            "error": self.error,
            "t": self.t,
            "budget": self.cfg.budget,
            "initial": self.cfg.initial,
            "dims": space.dims,
            "bounds": space.to_json(),
            "expert_mode": self.expert_mode,
            "acq": self.cfg.acq,
            "zeta": self.cfg.zeta,
            "gamma": self.cfg.gamma,
            "preferences": {
                "total": self.cfg.pref.m_pairs,
                "labeled": len(self.pref_labels),
                "pending_pair": pending,
                "hypothesis": self.hypothesis.to_json() if self.hypothesis else None,
            },
            "context": self.context.to_json(),
            "history": [
                {k: h[k] for k in ("step", "side", "x", "y")} for h in self.history
            ],
            "regret": self.regret(),
            "suggested_dims": list(self._suggested_dims()),
        }

    def _suggested_dims(self) -> tuple:
        cached = getattr(self, "_dims_cache", None)
        if cached and cached[0] == len(self.context):
            return cached[1]
        try:
            dims = suggest_dims(
                self.cfg.model, self.context, self.cfg.task.space, EiConfig(self.cfg.zeta)
            )
        except Exception:
            dims = (0, min(1, self.cfg.task.space.dims - 1))
        self._dims_cache = (len(self.context), dims)
        return dims

    def candidates_json(self) -> dict:
        if self.phase != AWAITING or self.current is None:
            raise PhaseError(f"no candidates in phase {self.phase}")
        return dict(self.current, id=self.sid, api_version=API_VERSION)

    def heatmap_json(self, d1: Optional[int], d2: Optional[int], res: int) -> dict:
        """Snapshot under the lock, render the grid outside it."""
        with self.lock:
            if d1 is None or d2 is None:
                d1, d2 = self._suggested_dims()
            context, pref_model, t = self.context, self.pref_model, self.t
        hs = slice_heatmap(
            self.cfg.model,
            pref_model,
            context,
            self.cfg.task.space,
            (int(d1), int(d2)),
            resolution=res,
            sched=DecaySchedule(self.cfg.gamma, t),
            cfg=EiConfig(self.cfg.zeta),
            mc_seed=derive_seed(self.cfg.seed, STEP_SEED_BASE + t),
            acq=self.cfg.acq,
        )
        return dict(hs.to_json(), id=self.sid, api_version=API_VERSION)

    # ---- persistence -------------------------------------------------------

    def persist(self):
        if self.store.directory is None:
            return
        doc = {
            "api_version": API_VERSION,
            "sid": self.sid,
            "expert_mode": self.expert_mode,
            "phase": self.phase,
            "t": self.t,
            "task": task_to_json(self.cfg.task, self.cfg.task_kind),
            "checkpoint_path": self.cfg.model_ref,
            "config": {
                "budget": self.cfg.budget,
                "initial": self.cfg.initial,
                "gamma": self.cfg.gamma,
                "zeta": self.cfg.zeta,
                "sigma_pref": self.cfg.sigma_pref,
                "seed": self.cfg.seed,
                "acq": self.cfg.acq,
                "explanations": self.cfg.explanations,
                "m_pairs": self.cfg.pref.m_pairs,
                "hypothesis_kind": self.cfg.pref.hypothesis_kind,
            },
            "hypothesis": self.hypothesis.to_json() if self.hypothesis else None,
            "pref_pairs": [[a.tolist(), b.tolist()] for a, b in self.pref_pairs],
            "pref_labels": list(self.pref_labels),
            "context": self.context.to_json(),
            "history": self.history,
            "current": self.current,
            "error": self.error,
        }
        path = self.store.directory / f"{self.sid}.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc), encoding="utf-8")
        tmp.replace(path)

    @staticmethod
    def restore(doc: dict, store: "SessionStore") -> "Session":
        task = task_from_json(doc["task"])
        model = store.model_cache(doc["checkpoint_path"])
        c = doc["config"]
        cfg = SessionConfig(
            task=task,
            model=model,
            pref=PrefConfig(m_pairs=c["m_pairs"], hypothesis_kind=c["hypothesis_kind"]),
            budget=c["budget"],
            initial=c["initial"],
            gamma=c["gamma"],
            zeta=c["zeta"],
            expert_mode=doc["expert_mode"],
            sigma_pref=c["sigma_pref"],
            seed=c["seed"],
            acq=c["acq"],
            explanations=c["explanations"],
            task_kind=doc["task"]["kind"],
            model_ref=doc["checkpoint_path"],
        )
        s = Session(doc["sid"], cfg, doc["expert_mode"], store)
        s.phase = doc["phase"]
        s.t = doc["t"]
        s.context = TaskDataset.from_json(doc["context"])
        if len(s.context) == 0:
            s.context = TaskDataset.empty(task.task_id, task.space.dims)
        s.hypothesis = Hypothesis.from_json(doc["hypothesis"]) if doc["hypothesis"] else None
        s.pref_pairs = [
            (np.asarray(a), np.asarray(b)) for a, b in doc["pref_pairs"]
        ]
        s.pref_labels = list(doc["pref_labels"])
        s.history = doc["history"]
        s.current = doc["current"]
        s.error = doc.get("error")
        if len(s.pref_labels) == cfg.pref.m_pairs and s.pref_labels:
            s._fit_preferences()
        # a proposal interrupted by a restart is recomputed on demand
        if s.phase == EVALUATING:
            s._propose_async()
        return s


class SessionStore:
    def __init__(self, directory: Optional[Path] = None, workers: int = 2):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self._models: dict[str, object] = {}
        self._lock = threading.Lock()

    def model_cache(self, path: str):
        with self._lock:
            if path not in self._models:
                self._models[path] = load_model(path)
            return self._models[path]

    def add(self, session: Session):
        with self._lock:
            self.sessions[session.sid] = session

    def get(self, sid: str) -> Session:
        with self._lock:
            if sid not in self.sessions:
                raise SessionNotFound(f"no session {sid}")
            return self.sessions[sid]

    def load_all(self):
        if not self.directory:
            return
        for path in sorted(self.directory.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
                self.add(Session.restore(doc, self))
            except Exception:
                continue


def create_app(
    sessions_dir: Optional[str] = None,
    defaults: Optional[dict] = None,
    ui_dir: Optional[str] = None,
    workers: int = 2,
) -> FastAPI:
    app = FastAPI(title="expert session service", version=str(API_VERSION))
    store = SessionStore(sessions_dir, workers=workers)
    store.load_all()
    app.state.store = store
    defaults = defaults or {}

    @app.exception_handler(ExpertBoError)
    async def domain_error(_req: Request, exc: ExpertBoError):
        status = 409 if isinstance(exc, PhaseError) else 404 if isinstance(exc, SessionNotFound) else 400
        return JSONResponse({"error": type(exc).__name__, "detail": str(exc)}, status_code=status)

    from fastapi.exceptions import RequestValidationError

    @app.exception_handler(RequestValidationError)
    async def bad_request(_req: Request, exc: RequestValidationError):
        return JSONResponse({"error": "BadRequest", "detail": str(exc)}, status_code=400)

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        if req.expert_mode not in ("interactive", "simulated"):
            raise ConfigError(f"unknown expert mode {req.expert_mode!r}")
        family = load_family(req.family_path)
        task = family.task_by_id(req.task_id) if req.task_id else family.test[0]
        model = store.model_cache(req.checkpoint_path)
        cfg = SessionConfig(
            task=task,
            model=model,
            pref=PrefConfig(
                m_pairs=req.m_pairs,
                hypothesis_kind=req.hypothesis_kind,
                boxes=req.hypothesis_boxes,
            ),
            budget=req.budget,
            initial=req.initial,
            gamma=req.gamma,
            zeta=req.zeta,
            expert_mode=req.expert_mode,
            sigma_pref=req.sigma_pref,
            seed=req.seed,
            acq=req.acq,
            explanations=req.explanations,
            task_kind=family.family_config.kind,
            model_ref=req.checkpoint_path,
        )
        session = Session(uuid.uuid4().hex[:12], cfg, req.expert_mode, store)
        session.start()
        store.add(session)
        with session.lock:
            return session.state_json()

    @app.get("/sessions/{sid}")
    def get_state(sid: str):
        session = store.get(sid)
        with session.lock:
            return session.state_json()

    @app.post("/sessions/{sid}/preferences")
    def post_labels(sid: str, body: PreferenceLabels):
        session = store.get(sid)
        with session.lock:
            session.submit_labels(body.labels)
            return session.state_json()

    @app.get("/sessions/{sid}/candidates")
    def get_candidates(sid: str):
        session = store.get(sid)
        with session.lock:
            return session.candidates_json()

    @app.post("/sessions/{sid}/choice")
    def post_choice(sid: str, body: ChoiceRequest):
        session = store.get(sid)
        with session.lock:
            session.choose(body.side)
            return session.state_json()

    @app.get("/sessions/{sid}/heatmap")
    def get_heatmap(sid: str, d1: Optional[int] = None, d2: Optional[int] = None, res: int = 24):
        session = store.get(sid)
        return session.heatmap_json(d1, d2, res)  # takes the lock internally

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        session = store.get(sid)
        with session.lock:
            session.abort()
            return session.state_json()

    if ui_dir and Path(ui_dir).is_dir():

        @app.get("/ui/defaults.json")
        def ui_defaults():
            return defaults

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

        @app.get("/")
        def index():
            return RedirectResponse("/ui/")

    return app


def main(argv=None):
    parser = argparse.ArgumentParser(description="run the expert session service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--sessions-dir", default="./sessions")
    parser.add_argument("--family", default=None, help="default family JSON path")
    parser.add_argument("--checkpoint", default=None, help="default checkpoint path")
    parser.add_argument("--ui-dir", default=None, help="static UI bundle directory")
    args = parser.parse_args(argv)
    defaults = {
        "family_path": args.family,
        "checkpoint_path": args.checkpoint,
    }
    app = create_app(args.sessions_dir, defaults=defaults, ui_dir=args.ui_dir)
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
