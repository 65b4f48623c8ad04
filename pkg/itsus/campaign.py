"""
Campaign orchestration: runs every window of a run configuration, writes one trajectory
file per window and keeps a manifest of their status.

The output directory of a campaign looks like:

```
  <output>/
    config.yml                 # the run configuration, overrides applied
    manifest.yml               # one entry per window
    schedule.tsv               # shared ITS schedule (its, its-us)
    schedule-0007.tsv          # per window ITS schedules (its.per_window)
    calibration.yml            # calibration report(s)
    trajectories/window-0007.tsv
```

Windows are independent: each draws its noise from the rng stream (seed, window id) and
writes only its own file, so they run concurrently in a process pool bounded by `jobs`.
"""
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Tuple

from django.conf import settings

from . import formats
from .config import RunConfig
from .exceptions import ConfigError, SimulationDiverged
from .integrator import run_trajectory
from .potentials import SurfaceSpec, make_surface
from .tempering import ItsSchedule, calibrate_weights
from .umbrella import BiasedSystem, UmbrellaWindow, window_start
from .utils import beta
from .wham import WhamInput, WindowSamples

logger = logging.getLogger(__name__)

PENDING = "pending"
DONE = "done"
FAILED = "failed"
# a done window is reused only while these match the new manifest
RUN_DEFINITION = ("method", "surface", "temperature", "dynamics")
WINDOW_DEFINITION = ("restraints", "schedule", "seed_stream", "trajectory")


@dataclass(frozen=True)
class WindowJob:
    """
    Everything a worker process needs to run one window. Windows travel as plain data.
    """

    window_id: int
    surface: SurfaceSpec
    dynamics: object
    window: Optional[dict]
    schedule: Optional[ItsSchedule]
    start: Optional[Tuple[float, ...]]
    trajectory: str


def run_window(job: WindowJob) -> Tuple[int, int, float]:
    """
    Run one window and write its trajectory. Returns (window id, records, wall clock seconds).
    """
    started = time.monotonic()
    surface = make_surface(job.surface)
    window = UmbrellaWindow.from_config(job.window, surface) if job.window else None
    start = job.start
    if window is not None:
        start = window_start(surface, window, start=start)
    system = BiasedSystem(surface, its=job.schedule, window=window)
    trajectory = run_trajectory(
        surface,
        system,
        surface.collective_variables(),
        job.dynamics,
        initial_coords=start,
        window_id=job.window_id,
    )
    formats.write_trajectory(
        job.trajectory,
        trajectory,
        metadata={
            "surface": job.surface.to_config(),
            "restraints": job.window["restraints"] if job.window else [],
            "seed": job.dynamics.seed,
        },
    )
    return job.window_id, len(trajectory), time.monotonic() - started


def _changed(old, new, keys):
    return [key for key in keys if formats.plain(old.get(key)) != formats.plain(new.get(key))]


def _reusable(previous, manifest, entry) -> Optional[dict]:
    """
    The done entry of the previous manifest for the window of `entry`, if the run and the
    window are still defined the same way.
    """
    done = [e for e in previous.get("windows", []) if e.get("id") == entry["id"] and e.get("status") == DONE]
    if not done:
        return None
    changed = _changed(previous, manifest, RUN_DEFINITION) + _changed(done[0], entry, WINDOW_DEFINITION)
    if changed:
        logger.info("Window %d is rerun: %s changed since it was done", entry["id"], ", ".join(changed))
        return None
    return done[0]


class Campaign:
    """
    A sampling campaign of one run configuration.

    The campaign is configured by the run configuration plus two process wide settings:
    ```
      ITSUS_OUTPUT_ROOT = "./itsus-runs"   # parent of the default output directories
      ITSUS_DEFAULT_JOBS = 1               # concurrent windows when --jobs is not given
    ```

    An explicit `output` (or the configuration's `output`) replaces
    `<ITSUS_OUTPUT_ROOT>/<name>`.
    """

    MANIFEST = "manifest.yml"
    CONFIG = "config.yml"
    SCHEDULE = "schedule.tsv"
    CALIBRATION = "calibration.yml"
    TRAJECTORIES = "trajectories"

    DEFAULT_OUTPUT_ROOT = "./itsus-runs"
    DEFAULT_JOBS = 1

    def __init__(self, config: RunConfig, output=None, jobs=None):
        self.config = config
        self.surface = config.make_surface()
        root = getattr(settings, "ITSUS_OUTPUT_ROOT", self.DEFAULT_OUTPUT_ROOT)
        self.output = output or config.output or os.path.join(root, config.name)
        self.jobs = int(jobs or getattr(settings, "ITSUS_DEFAULT_JOBS", self.DEFAULT_JOBS))
        if self.jobs < 1:
            raise ConfigError("jobs", "must be at least 1")

    def path(self, *parts) -> str:
        return os.path.join(self.output, *parts)

    @property
    def manifest_path(self) -> str:
        return self.path(self.MANIFEST)

    def windows(self) -> List[Optional[UmbrellaWindow]]:
        """
        The scheduled windows; a single unbiased window for plain MD and ITS.
        """
        schedule = self.config.window_schedule()
        return [None] if schedule is None else list(schedule)

    def _window_id(self, window) -> int:
        return 0 if window is None else window.id

    def trajectory_file(self, window_id) -> str:
        return os.path.join(self.TRAJECTORIES, f"window-{window_id:04d}.tsv")

    def schedule_file(self, window_id=None) -> str:
        if window_id is None:
            return self.SCHEDULE
        return f"schedule-{window_id:04d}.tsv"

    def _calibration_cfg(self):
        return replace(self.config.dynamics, n_steps=self.config.its.calibration.n_steps)

    def calibrate(self, window: Optional[UmbrellaWindow] = None, start=None):
        """
        Calibrate the ITS weights, shared or under the bias of `window`, and write the
        schedule file and the calibration report. Returns (schedule, report).
        """
        its = self.config.its
        if its is None:
            raise ConfigError("its", f"method {self.config.method} does not use ITS")
        calibration = its.calibration
        window_id = None if window is None else window.id
        if window is not None:
            start = window_start(self.surface, window, start=start)
        logger.info(
            "Calibrating ITS weights of %d temperatures%s",
            len(its.temperatures), "" if window is None else f" for window {window.id}",
        )
        schedule, report = calibrate_weights(
            self.surface,
            its.temperatures,
            self._calibration_cfg(),
            rounds=calibration.rounds,
            mixing=calibration.mixing,
            flatness_threshold=calibration.flatness,
            initial_coords=start,
            window=window,
            window_id=0 if window is None else window.id,
        )
        formats.write_schedule(
            self.path(self.schedule_file(window_id)),
            schedule,
            metadata={"converged": report.converged, "flatness": report.flatness},
        )
        reports = {}
        if os.path.exists(self.path(self.CALIBRATION)):
            reports = formats.read_yaml(self.path(self.CALIBRATION)) or {}
        reports["shared" if window_id is None else f"window-{window_id:04d}"] = report.to_config()
        formats.write_yaml(self.path(self.CALIBRATION), reports)
        return schedule, report

    def _load_or_calibrate(self, window_id, window=None, force=False):
        its = self.config.its
        if its.schedule and not its.per_window:
            schedule = formats.read_schedule(its.schedule)
            formats.write_schedule(self.path(self.SCHEDULE), schedule)
            return schedule
        path = self.path(self.schedule_file(window_id))
        if os.path.exists(path) and not force:
            logger.info("Reusing ITS schedule %s", path)
            return formats.read_schedule(path)
        start = self.config.windows.start if self.config.windows else None
        schedule, report = self.calibrate(window=window, start=start)
        if not report.converged:
            logger.warning("Running with an unconverged ITS schedule from %s", path)
        return schedule

    def schedules(self, windows, force=False) -> dict:
        """
        The ITS schedule of every window id, calibrating the missing ones.
        """
        if self.config.its is None:
            return {self._window_id(w): None for w in windows}
        if not self.config.its.per_window:
            shared = self._load_or_calibrate(None, force=force)
            return {self._window_id(w): shared for w in windows}
        return {
            self._window_id(w): self._load_or_calibrate(self._window_id(w), w, force=force)
            for w in windows
        }

    def load_manifest(self) -> Optional[dict]:
        if not os.path.exists(self.manifest_path):
            return None
        return formats.read_yaml(self.manifest_path)

    def write_manifest(self, manifest):
        formats.write_yaml(self.manifest_path, manifest)

    def _new_manifest(self, windows) -> dict:
        its = self.config.its
        return {
            "format": f"itsus-manifest {formats.FORMAT_VERSION}",
            "name": self.config.name,
            "method": self.config.method,
            "seed": self.config.seed,
            "surface": self.config.surface.to_config(),
            "temperature": self.config.dynamics.temperature,
            "dynamics": formats.plain(asdict(self.config.dynamics)),
            "budget_scale": self.config.budget_scale,
            "config": self.CONFIG,
            "windows": [
                {
                    "id": self._window_id(window),
                    "restraints": [] if window is None else window.to_config()["restraints"],
                    "trajectory": self.trajectory_file(self._window_id(window)),
                    "schedule": None
                    if its is None
                    else self.schedule_file(self._window_id(window) if its.per_window else None),
                    "seed_stream": [self.config.seed, self._window_id(window)],
                    "status": PENDING,
                    "wall_clock": None,
                    "n_records": 0,
                }
                for window in windows
            ],
        }

    def _job(self, entry, window, schedule) -> WindowJob:
        return WindowJob(
            window_id=entry["id"],
            surface=self.config.surface,
            dynamics=self.config.dynamics,
            window=None if window is None else window.to_config(),
            schedule=schedule,
            start=self.config.windows.start if self.config.windows else None,
            trajectory=self.path(entry["trajectory"]),
        )

    def _execute(self, jobs):
        """
        Run `jobs`, yielding (job, result or exception) as they finish.
        """
        if self.jobs == 1 or len(jobs) == 1:
            for job in jobs:
                try:
                    yield job, run_window(job)
                except SimulationDiverged as exc:
                    yield job, exc
            return
        with ProcessPoolExecutor(max_workers=min(self.jobs, len(jobs))) as executor:
            futures = [(job, executor.submit(run_window, job)) for job in jobs]
            for job, future in futures:
                try:
                    yield job, future.result()
                except SimulationDiverged as exc:
                    yield job, exc

    def run(self, force=False) -> dict:
        """
        Run every pending window, or every window with `force`, and return the manifest.

        Windows already done in an existing manifest are skipped. A diverged window is
        marked failed; the remaining windows still run and SimulationDiverged is raised once
        the manifest is written.
        """
        windows = self.windows()
        formats.write_yaml(self.path(self.CONFIG), self.config.to_config())
        manifest = self._new_manifest(windows)
        previous = self.load_manifest()
        if previous and not force:
            manifest["windows"] = [_reusable(previous, manifest, e) or e for e in manifest["windows"]]

        entries = {entry["id"]: entry for entry in manifest["windows"]}
        pending = [w for w in windows if entries[self._window_id(w)]["status"] != DONE]
        skipped = len(windows) - len(pending)
        if skipped:
            logger.info("Skipping %d window(s) already done", skipped)
        schedules = self.schedules(pending, force=force) if pending else {}
        self.write_manifest(manifest)

        jobs = [
            self._job(entries[self._window_id(w)], w, schedules[self._window_id(w)])
            for w in pending
        ]
        failures = []
        for job, result in self._execute(jobs):
            entry = entries[job.window_id]
            if isinstance(result, SimulationDiverged):
                entry["status"] = FAILED
                failures.append(result)
                logger.error("Window %d failed: %s", job.window_id, result)
            else:
                _, n_records, wall_clock = result
                entry.update(status=DONE, n_records=n_records, wall_clock=round(wall_clock, 3))
                logger.info("Window %d done in %.1f s", job.window_id, wall_clock)
            self.write_manifest(manifest)

        if failures:
            raise failures[0]
        return manifest


def load_campaign(manifest_path):
    """
    The manifest and the run configuration of the campaign that wrote `manifest_path`.
    """
    manifest = formats.read_yaml(manifest_path)
    if not isinstance(manifest, dict) or "windows" not in manifest:
        raise ConfigError(os.fspath(manifest_path), "not a campaign manifest")
    directory = os.path.dirname(os.path.abspath(manifest_path))
    config = RunConfig.from_config(formats.read_yaml(os.path.join(directory, manifest["config"])))
    return manifest, config.with_overrides(output=directory)


def wham_input(manifest_path, skip=0.0, max_time=None, stride=1) -> WhamInput:
    """
    The WHAM input of a finished campaign, each trajectory cut to the requested segment.
    """
    manifest = formats.read_yaml(manifest_path)
    if not isinstance(manifest, dict) or "windows" not in manifest:
        raise ConfigError(os.fspath(manifest_path), "not a campaign manifest")
    directory = os.path.dirname(os.path.abspath(manifest_path))
    surface = make_surface(SurfaceSpec.from_config(manifest["surface"]))
    schedules = {}
    windows = []
    for entry in manifest["windows"]:
        if entry.get("status") != DONE:
            raise ConfigError(f"manifest.windows.{entry['id']}", f"window is {entry.get('status')}")
        path = os.path.join(directory, entry["trajectory"])
        if not os.path.exists(path):
            raise ConfigError(f"manifest.windows.{entry['id']}", f"missing trajectory {path}")
        trajectory = formats.read_trajectory(path).segment(skip, max_time, stride)
        its = None
        if entry.get("schedule"):
            name = entry["schedule"]
            if name not in schedules:
                schedules[name] = formats.read_schedule(os.path.join(directory, name))
            its = schedules[name]
        window = (
            UmbrellaWindow.from_config(entry, surface) if entry.get("restraints") else None
        )
        windows.append(WindowSamples.from_trajectory(trajectory, window=window, its=its))
    return WhamInput(windows=tuple(windows), beta0=beta(float(manifest["temperature"])))
