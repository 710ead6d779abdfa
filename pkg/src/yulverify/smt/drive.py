"""Solver backends and obligation discharge.

Every obligation is solved in a fresh solver context with no incremental
state: one query, one context, one answer.  Native backends get a fresh
process per query.  The WebAssembly build of Z3 (the default backend) pays a
large per-process startup cost, so its discharge path runs a pool of worker
child processes, each owned by one thread; a worker evaluates one obligation
at a time in a brand-new context and is killed and respawned if a query
overruns its wall-clock budget, which preserves the isolation of the
process-per-query model at a fraction of the cost.  A second registered
configuration runs the same solver with a different arithmetic-search
configuration, and bindings for common native solvers are registered when
their executables are on PATH.
"""

from __future__ import annotations

import os
import select
import shutil
import subprocess
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ..terms import ARR, BOOL, INT, ArrayVal, eval_term, free_syms, uapps
from ..wp import Obligation
from .emit import script_for

_WRAPPER = Path(__file__).with_name("z3wasm.mjs")

_node_modules_cache: Optional[tuple[Optional[str]]] = None


def _find_node_modules() -> Optional[str]:
    """Locate a node_modules directory containing z3-solver."""
    global _node_modules_cache
    if _node_modules_cache is not None:
        return _node_modules_cache[0]

    def ok(d: str) -> bool:
        return os.path.isdir(os.path.join(d, "z3-solver"))

    candidates: list[str] = []
    env = os.environ.get("YV_NODE_MODULES")
    if env:
        candidates.append(env)
    for start in (os.getcwd(), str(_WRAPPER.parent)):
        d = start
        while True:
            candidates.append(os.path.join(d, "node_modules"))
            nd = os.path.dirname(d)
            if nd == d:
                break
            d = nd
    found = next((c for c in candidates if ok(c)), None)
    if found is None and shutil.which("npm"):
        try:
            r = subprocess.run(["npm", "root", "-g"], capture_output=True,
                               text=True, timeout=20)
            root = r.stdout.strip()
            if root and ok(root):
                found = root
        except (OSError, subprocess.SubprocessError):
            pass
    _node_modules_cache = (found,)
    return found


@dataclass
class SolverConfig:
    name: str = "z3"
    timeout: float = 10.0
    jobs: int = 1


@dataclass
class Verdict:
    oid: str
    status: str  # Verified | Refuted | Unknown | Timeout | SolverError
    backend: str
    wall_time: float
    model: dict[str, object] = field(default_factory=dict)
    functions: dict[str, str] = field(default_factory=dict)
    model_valid: Optional[bool] = None
    detail: str = ""


class Backend:
    name: str = ""

    def available(self) -> bool:  # pragma: no cover - interface
        raise NotImplementedError

    def solve(self, script: str,
              timeout: float) -> tuple[str, float, bool]:
        """Run one script; returns (output, elapsed seconds, killed)."""
        raise NotImplementedError  # pragma: no cover - interface


class WorkerStartError(RuntimeError):
    """A solver worker process failed to come up."""


class _WasmWorker:
    """One long-lived solver child process; solves one query at a time.

    The child evaluates every script in a fresh solver context, so queries
    stay isolated even though the process is reused.  A query that misses
    its wall-clock deadline kills the whole process."""

    _START_DEADLINE = 120.0

    def __init__(self, params: dict[str, str]):
        node = shutil.which("node")
        modules = _find_node_modules()
        if node is None or modules is None:  # pragma: no cover - guarded
            raise WorkerStartError("node or z3-solver unavailable")
        env = dict(os.environ)
        env["YV_NODE_MODULES"] = modules
        argv = [node, str(_WRAPPER), "--serve"]
        argv += [f"{k}={v}" for k, v in sorted(params.items())]
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, env=env)
        self._buf = b""
        self.ok = True
        line = self._read_line(time.monotonic() + self._START_DEADLINE)
        if line != b"READY":
            self.close()
            raise WorkerStartError(
                f"solver worker did not start (got {line!r})")

    # -- framed reads with a deadline --------------------------------------

    def _fill(self, deadline: float) -> bool:
        fd = self.proc.stdout.fileno()
        wait = deadline - time.monotonic()
        if wait <= 0:
            return False
        ready, _, _ = select.select([fd], [], [], wait)
        if not ready:
            return False
        chunk = os.read(fd, 65536)
        if not chunk:
            return False
        self._buf += chunk
        return True

    def _read_line(self, deadline: float) -> Optional[bytes]:
        while b"\n" not in self._buf:
            if not self._fill(deadline):
                return None
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def _read_exact(self, n: int, deadline: float) -> Optional[bytes]:
        while len(self._buf) < n:
            if not self._fill(deadline):
                return None
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    # -- public API --------------------------------------------------------

    def solve(self, script: str, timeout: float) -> tuple[str, float, bool]:
        payload = script.encode()
        start = time.monotonic()
        deadline = start + timeout + 10.0
        try:
            self.proc.stdin.write(
                b"Q %d %d\n" % (int(timeout * 1000), len(payload)))
            self.proc.stdin.write(payload)
            self.proc.stdin.flush()
        except OSError:
            self.ok = False
            return "", time.monotonic() - start, False
        header = self._read_line(deadline)
        if header is None:
            self._kill()
            return "", time.monotonic() - start, True
        parts = header.split()
        if len(parts) != 2 or parts[0] not in (b"R", b"E"):
            self._kill()
            return "", time.monotonic() - start, True
        body = self._read_exact(int(parts[1]), deadline)
        if body is None:
            self._kill()
            return "", time.monotonic() - start, True
        return body.decode(errors="replace"), time.monotonic() - start, False

    def _kill(self) -> None:
        self.ok = False
        try:
            self.proc.kill()
        except OSError:
            pass
        self.proc.wait()

    def close(self) -> None:
        self.ok = False
        try:
            if self.proc.stdin and not self.proc.stdin.closed:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover - stuck child
            self.proc.kill()
            self.proc.wait()


class Z3WasmBackend(Backend):
    def __init__(self, name: str, params: Optional[dict[str, str]] = None):
        self.name = name
        self.params = dict(params or {})

    def available(self) -> bool:
        return (shutil.which("node") is not None
                and _WRAPPER.exists()
                and _find_node_modules() is not None)

    def worker(self) -> _WasmWorker:
        return _WasmWorker(self.params)

    def solve(self, script: str, timeout: float) -> tuple[str, float, bool]:
        node = shutil.which("node")
        modules = _find_node_modules()
        env = dict(os.environ)
        if modules:
            env["YV_NODE_MODULES"] = modules
        with tempfile.NamedTemporaryFile(
                "w", suffix=".smt2", prefix="yv_", delete=False) as f:
            f.write(script)
            path = f.name
        argv = [node, str(_WRAPPER), path, str(int(timeout * 1000))]
        argv += [f"{k}={v}" for k, v in sorted(self.params.items())]
        start = time.monotonic()
        try:
            r = subprocess.run(argv, capture_output=True, text=True,
                               timeout=timeout + 10.0, env=env)
            elapsed = time.monotonic() - start
            return r.stdout + r.stderr, elapsed, False
        except subprocess.TimeoutExpired:
            return "", time.monotonic() - start, True
        finally:
            try:
                os.unlink(path)
            except OSError:
                pass


class BinaryBackend(Backend):
    def __init__(self, name: str, exe: str,
                 argv: Callable[[str, int], list[str]]):
        self.name = name
        self.exe = exe
        self.argv = argv

    def available(self) -> bool:
        return shutil.which(self.exe) is not None

    def solve(self, script: str, timeout: float) -> tuple[str, float, bool]:
        with tempfile.NamedTemporaryFile(
                "w", suffix=".smt2", prefix="yv_", delete=False) as f:
            f.write(script)
            path = f.name
        start = time.monotonic()
        try:
            r = subprocess.run(
                [self.exe] + self.argv(path, int(timeout * 1000)),
                capture_output=True, text=True, timeout=timeout + 10.0)
            return r.stdout + r.stderr, time.monotonic() - start, False
        except subprocess.TimeoutExpired:
            return "", time.monotonic() - start, True
        finally:
            try:
                os.unlink(path)
            except OSError:
                pass


BACKENDS: dict[str, Backend] = {
    "z3": Z3WasmBackend("z3"),
    "z3-alt": Z3WasmBackend("z3-alt", {
        "smt.arith.solver": "2",
        "smt.random_seed": "17",
        "sat.random_seed": "17",
    }),
    "cvc5": BinaryBackend(
        "cvc5", "cvc5",
        lambda path, ms: ["--lang", "smt2", "--produce-models",
                          f"--tlimit={ms}", path]),
    "cvc4": BinaryBackend(
        "cvc4", "cvc4",
        lambda path, ms: ["--lang", "smt2", "--produce-models",
                          f"--tlimit={ms}", path]),
    "alt-ergo": BinaryBackend(
        "alt-ergo", "alt-ergo",
        lambda path, ms: ["--timelimit", str(max(1, ms // 1000)), path]),
}


def available_backends() -> list[str]:
    return [name for name, b in BACKENDS.items() if b.available()]


# ---------------------------------------------------------------------------
# Model parsing
# ---------------------------------------------------------------------------


def _tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i:j + 1]
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            yield text[i:j]
            i = j


def _read_sexps(text: str) -> list:
    stack: list[list] = [[]]
    for tok in _tokenize(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            if not stack:
                return []  # unbalanced; treat as no parse
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


class _Opaque(Exception):
    pass


def _value(v) -> object:
    if isinstance(v, str):
        if v == "true":
            return True
        if v == "false":
            return False
        try:
            return int(v)
        except ValueError:
            raise _Opaque(v)
    if isinstance(v, list) and v:
        if v[0] == "-" and len(v) == 2:
            inner = _value(v[1])
            if isinstance(inner, int):
                return -inner
        if isinstance(v[0], list) and len(v[0]) >= 2 and v[0][0] == "as" \
                and v[0][1] == "const":
            default = _value(v[1])
            if isinstance(default, int):
                return ArrayVal(default)
        if v[0] == "store" and len(v) == 4:
            base = _value(v[1])
            idx = _value(v[2])
            val = _value(v[3])
            if isinstance(base, ArrayVal) and isinstance(idx, int) \
                    and isinstance(val, int):
                return base.set(idx, val)
    raise _Opaque(repr(v))


def _unparse(v) -> str:
    if isinstance(v, list):
        return "(" + " ".join(_unparse(x) for x in v) + ")"
    return str(v)


def parse_model(text: str) -> tuple[dict[str, object], dict[str, str]]:
    """Extract (constant values, raw function definitions) from solver
    model output."""
    values: dict[str, object] = {}
    functions: dict[str, str] = {}

    def walk(node) -> None:
        if not isinstance(node, list):
            return
        if node and node[0] == "define-fun" and len(node) >= 5:
            name = node[1]
            params = node[2]
            body = node[-1]
            if isinstance(name, str):
                if params == []:
                    try:
                        values[name] = _value(body)
                    except _Opaque:
                        functions[name] = _unparse(body)
                else:
                    functions[name] = _unparse(node)
            return
        for child in node:
            walk(child)

    for top in _read_sexps(text):
        walk(top)
    return values, functions


def validate_model(ob: Obligation,
                   values: dict[str, object]) -> Optional[bool]:
    """Check a counterexample: all hypotheses true and the goal false.

    Returns None when the obligation cannot be concretely evaluated
    (quantifiers or uninterpreted functions without supplied values)."""
    if any(uapps(t) for t in (*ob.hyps, ob.goal)):
        return None
    env: dict[str, object] = {}
    for t in (*ob.hyps, ob.goal):
        for s in free_syms(t):
            if s.name in values:
                env[s.name] = values[s.name]
            elif s.sort == ARR:
                env[s.name] = ArrayVal(0)
            elif s.sort == BOOL:
                env[s.name] = False
            else:
                env[s.name] = 0
    try:
        hyps_ok = all(eval_term(h, env) for h in ob.hyps)
        goal_val = eval_term(ob.goal, env)
    except (ValueError, KeyError, ZeroDivisionError):
        return None
    return bool(hyps_ok and not goal_val)


# ---------------------------------------------------------------------------
# Discharge
# ---------------------------------------------------------------------------


def _classify(ob: Obligation, config: SolverConfig, out: str,
              elapsed: float, killed: bool) -> Verdict:
    """Turn raw solver output into a Verdict."""
    if killed:
        return Verdict(ob.oid, "Timeout", config.name, elapsed,
                       detail="process killed at wall-clock limit")

    answer = None
    rest_lines: list[str] = []
    for line in out.splitlines():
        tok = line.strip()
        if answer is None and tok in ("sat", "unsat", "unknown"):
            answer = tok
            continue
        rest_lines.append(line)
    rest = "\n".join(rest_lines)

    if answer == "unsat":
        return Verdict(ob.oid, "Verified", config.name, elapsed)
    if answer == "sat":
        values, functions = parse_model(rest)
        return Verdict(ob.oid, "Refuted", config.name, elapsed,
                       model=values, functions=functions,
                       model_valid=validate_model(ob, values),
                       detail=rest.strip()[:4000])
    if answer == "unknown":
        if elapsed >= 0.95 * config.timeout:
            return Verdict(ob.oid, "Timeout", config.name, elapsed)
        return Verdict(ob.oid, "Unknown", config.name, elapsed,
                       detail=rest.strip()[:400])
    low = out.lower()
    if "timeout" in low or "interrupted" in low:
        return Verdict(ob.oid, "Timeout", config.name, elapsed)
    return Verdict(ob.oid, "SolverError", config.name, elapsed,
                   detail=out.strip()[:4000])


def discharge(ob: Obligation, config: SolverConfig) -> Verdict:
    backend = BACKENDS.get(config.name)
    if backend is None:
        return Verdict(ob.oid, "SolverError", config.name, 0.0,
                       detail=f"unknown backend '{config.name}'")
    if not backend.available():
        return Verdict(ob.oid, "SolverError", config.name, 0.0,
                       detail=f"backend '{config.name}' is not available")
    script = script_for(ob)
    out, elapsed, killed = backend.solve(script, config.timeout)
    return _classify(ob, config, out, elapsed, killed)


def _discharge_pool(obs: list[Obligation], config: SolverConfig,
                    backend: Z3WasmBackend, jobs: int) -> list[Verdict]:
    """Discharge through worker processes, one obligation at a time each."""
    scripts = [script_for(ob) for ob in obs]
    results: list[Optional[Verdict]] = [None] * len(obs)
    cursor = iter(range(len(obs)))
    lock = threading.Lock()

    def next_index() -> Optional[int]:
        with lock:
            return next(cursor, None)

    def run() -> None:
        worker: Optional[_WasmWorker] = None
        try:
            while True:
                i = next_index()
                if i is None:
                    break
                start = time.monotonic()
                if worker is None:
                    try:
                        worker = backend.worker()
                    except WorkerStartError as e:
                        results[i] = Verdict(
                            obs[i].oid, "SolverError", config.name,
                            time.monotonic() - start, detail=str(e))
                        continue
                out, solve_time, killed = worker.solve(
                    scripts[i], config.timeout)
                elapsed = time.monotonic() - start
                if not out and not killed:
                    results[i] = Verdict(
                        obs[i].oid, "SolverError", config.name, elapsed,
                        detail="solver worker died")
                else:
                    results[i] = _classify(obs[i], config, out,
                                           elapsed, killed)
                if not worker.ok:
                    worker.close()
                    worker = None
        finally:
            if worker is not None:
                worker.close()

    threads = [threading.Thread(target=run, daemon=True)
               for _ in range(min(jobs, len(obs)))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(v is not None for v in results)
    return results  # type: ignore[return-value]


def discharge_all(obs: list[Obligation],
                  config: SolverConfig) -> list[Verdict]:
    if not obs:
        return []
    jobs = max(1, config.jobs)
    backend = BACKENDS.get(config.name)
    if isinstance(backend, Z3WasmBackend) and backend.available():
        return _discharge_pool(obs, config, backend, jobs)
    if jobs == 1:
        return [discharge(ob, config) for ob in obs]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda ob: discharge(ob, config), obs))


__all__ = [
    "BACKENDS",
    "Backend",
    "SolverConfig",
    "Verdict",
    "available_backends",
    "discharge",
    "discharge_all",
    "parse_model",
    "validate_model",
]
