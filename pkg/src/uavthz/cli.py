"""Command-line front end: train, eval, baseline and linkbudget subcommands.

Every run writes its outputs under --out-dir only, preceded by a manifest
that echoes the resolved configuration and is finalized with wall-clock
timings and SHA-256 digests of the produced files. Output tables are CSV
with a '#'-prefixed metadata preamble and 9-significant-digit floats, so a
repeated run with the same config and seed is byte-identical.
"""

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

import uavthz
from uavthz import baseline, channel, geometry, neural, td3
from uavthz.antenna import ArrayAntennaConfig, normalization_constant
from uavthz.channel import LinkState
from uavthz.config import RunConfig, load_config, serialize_config
from uavthz.environment import Environment
from uavthz.errors import ConfigError, InvalidInputError, NumericFailureError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_NET_FILES = ("actor", "actor_target", "critic1", "critic1_target",
              "critic2", "critic2_target")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def write_csv(path: Path, meta: dict, header, rows) -> None:
    lines = [f"# {k}: {_fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Manifest:
    """Run metadata written before the work starts and finalized after it ends."""

    def __init__(self, out_dir: Path, command: str, cfg: RunConfig, seed: int):
        self.path = out_dir / "manifest.json"
        self.started = time.time()
        self.data = {
            "version": uavthz.__version__,
            "command": command,
            "seed": seed,
            "status": "running",
            "config": serialize_config(cfg),
            "config_sha256": hashlib.sha256(
                serialize_config(cfg).encode()).hexdigest(),
            "resolved_si": {
                "noise_power_w": cfg.channel_params().noise_power_w,
                "tx_power_w": cfg.env_config().tx_power_w,
                "sinr_threshold_linear": cfg.channel_params().sinr_threshold,
                "vibration_std_rad": cfg.channel_params().vibration_std_rad,
                "carrier_hz": cfg.channel_params().carrier_hz,
                "action_scale_m": cfg.env_config().action_scale,
            },
            "outputs": {},
        }
        self._write()

    def _write(self):
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")

    def finalize(self, out_dir: Path, extra: dict | None = None):
        self.data["status"] = "complete"
        self.data["wall_clock_s"] = time.time() - self.started
        if extra:
            self.data.update(extra)
        for f in sorted(out_dir.rglob("*")):
            if f.is_file() and f != self.path:
                self.data["outputs"][str(f.relative_to(out_dir))] = _sha256(f)
        self._write()


def _build_env(cfg: RunConfig) -> Environment:
    return Environment(cfg.env_config(), cfg.channel_params())


def _build_agent(cfg: RunConfig, seed: int) -> td3.Td3Agent:
    return td3.Td3Agent.create(cfg.normalizer(), cfg.hyperparams(), seed)


def moving_average(values, window: int):
    """Trailing mean over up to `window` previous entries (inclusive)."""
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def save_checkpoint(ck_dir: Path, agent: td3.Td3Agent, cfg: RunConfig, seed: int) -> None:
    ck_dir.mkdir(parents=True, exist_ok=True)
    neural.save_net(ck_dir / "actor.npz", agent.actor, agent.adam_actor)
    neural.save_net(ck_dir / "actor_target.npz", agent.actor_target)
    neural.save_net(ck_dir / "critic1.npz", agent.critic1, agent.adam_critic1)
    neural.save_net(ck_dir / "critic1_target.npz", agent.critic1_target)
    neural.save_net(ck_dir / "critic2.npz", agent.critic2, agent.adam_critic2)
    neural.save_net(ck_dir / "critic2_target.npz", agent.critic2_target)
    (ck_dir / "config.txt").write_text(serialize_config(cfg), encoding="utf-8")
    (ck_dir / "meta.json").write_text(
        json.dumps({"version": uavthz.__version__, "agent_seed": seed,
                    "critic_updates": agent.critic_updates,
                    "actor_updates": agent.actor_updates}, indent=2) + "\n",
        encoding="utf-8")


def load_checkpoint(ck_dir: Path, cfg: RunConfig) -> td3.Td3Agent:
    meta_path = ck_dir / "meta.json"
    if not meta_path.is_file():
        raise ConfigError(f"no checkpoint at {ck_dir}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    agent = _build_agent(cfg, int(meta.get("agent_seed", 0)))
    nets = {}
    adams = {}
    for name in _NET_FILES:
        nets[name], adams[name] = neural.load_net(ck_dir / f"{name}.npz")
    expected = agent.actor.architecture()
    if nets["actor"].architecture() != expected:
        raise ConfigError(
            f"checkpoint actor architecture {nets['actor'].architecture()} "
            f"does not match config architecture {expected}")
    agent.actor = nets["actor"]
    agent.actor_target = nets["actor_target"]
    agent.critic1, agent.critic1_target = nets["critic1"], nets["critic1_target"]
    agent.critic2, agent.critic2_target = nets["critic2"], nets["critic2_target"]
    for name, attr in (("actor", "adam_actor"), ("critic1", "adam_critic1"),
                       ("critic2", "adam_critic2")):
        if adams[name] is not None:
            setattr(agent, attr, adams[name])
    agent.critic_updates = int(meta.get("critic_updates", 0))
    agent.actor_updates = int(meta.get("actor_updates", 0))
    return agent


# ------------------------------------------------------------------ subcommands

def cmd_train(cfg: RunConfig, seed: int, out_dir: Path) -> int:
    manifest = Manifest(out_dir, "train", cfg, seed)
    env = _build_env(cfg)
    env.reset(seed)
    agent = _build_agent(cfg, seed)
    agent, logs = td3.train(env, agent, cfg.hyperparams())
    rewards = [lg.reward for lg in logs]
    avg = moving_average(rewards, 40)
    write_csv(out_dir / "rewards.csv",
              {"seed": seed, "version": uavthz.__version__},
              ("episode", "reward", "moving_avg_40"),
              [(lg.episode, lg.reward, avg[i]) for i, lg in enumerate(logs)])
    save_checkpoint(out_dir / "checkpoint", agent, cfg, seed)
    manifest.finalize(out_dir, {
        "episodes": len(logs),
        "final_moving_avg_40": avg[-1],
        "alarm_steps": env.alarm_steps,
        "total_steps": env.total_steps,
    })
    return EXIT_OK


def _sbs_layout_rows(env: Environment):
    return [(i, p[0], p[1]) for i, p in enumerate(env.topology.positions())]


def cmd_eval(cfg: RunConfig, checkpoint: Path, scenario_seed: int, out_dir: Path) -> int:
    manifest = Manifest(out_dir, "eval", cfg, scenario_seed)
    agent = load_checkpoint(checkpoint, cfg)
    env = _build_env(cfg)
    env.reset(scenario_seed)
    trace = td3.greedy_rollout(env, agent, cfg.steps_per_episode)
    # Re-score every visited position at evaluation-grade sample counts with
    # one shared seed, so along-trajectory comparisons share their randomness.
    rescore_seed = scenario_seed + 1
    n_links = len(env.topology.sbs_list)
    rows = []
    for pt in trace:
        est = env.outage_at(pt.position, cfg.mc_samples_eval, rescore_seed)
        rows.append((pt.step, pt.time, pt.position[0], pt.position[1], pt.position[2],
                     channel.max_outage(est), *est.per_link_outage))
    header = ("step", "t", "x", "y", "z", "max_outage",
              *(f"outage_{i + 1}" for i in range(n_links)))
    meta = {"seed": scenario_seed, "version": uavthz.__version__,
            "mc_samples": cfg.mc_samples_eval, "rescore_seed": rescore_seed}
    write_csv(out_dir / "trajectory.csv", meta, header, rows)
    write_csv(out_dir / "sbs_layout.csv",
              {"seed": scenario_seed, "version": uavthz.__version__},
              ("index", "x", "y"), _sbs_layout_rows(env))
    episode_time = trace[-1].time
    manifest.finalize(out_dir, {
        "episode_time_s": episode_time,
        "time_budget_s": env.config.mean_change_interval,
        "time_budget_satisfied": bool(episode_time <= env.config.mean_change_interval),
        "initial_max_outage": rows[0][5],
        "final_max_outage": rows[-1][5],
    })
    return EXIT_OK


def cmd_baseline(cfg: RunConfig, scenario_seed: int, out_dir: Path,
                 mc_samples: int | None = None) -> int:
    manifest = Manifest(out_dir, "baseline", cfg, scenario_seed)
    env = _build_env(cfg)
    env.reset(scenario_seed)
    spec = cfg.grid_spec(scenario_seed + 1)
    if mc_samples is not None:
        spec.mc_samples = mc_samples
    params = cfg.channel_params()
    rows = []
    best_pos, best_val = None, np.inf
    for pos, val in baseline.scan_grid(env.topology, params, spec):
        rows.append((pos[0], pos[1], pos[2], val))
        if val < best_val:
            best_pos, best_val = pos, val
    meta = {"seed": scenario_seed, "version": uavthz.__version__,
            "mc_samples": spec.mc_samples, "mc_seed": spec.seed}
    write_csv(out_dir / "grid_scan.csv", meta, ("x", "y", "z", "max_outage"), rows)
    center = baseline.static_center_policy(env.topology, cfg.kinematic_limits())
    center_est = channel.outage_probability(env.topology.sbs_list, center, params,
                                            spec.mc_samples, spec.seed)
    center_val = channel.max_outage(center_est)
    write_csv(out_dir / "baseline_summary.csv", meta,
              ("method", "x", "y", "z", "max_outage"),
              [("grid_oracle", best_pos[0], best_pos[1], best_pos[2], best_val),
               ("static_center", center[0], center[1], center[2], center_val)])
    write_csv(out_dir / "sbs_layout.csv",
              {"seed": scenario_seed, "version": uavthz.__version__},
              ("index", "x", "y"), _sbs_layout_rows(env))
    manifest.finalize(out_dir, {"oracle_max_outage": best_val,
                                "static_center_max_outage": center_val})
    return EXIT_OK


def _parse_xyz(text: str, n: int):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != n:
        raise ConfigError(f"expected {n} comma-separated numbers, got {text!r}")
    return parts


def cmd_linkbudget(cfg: RunConfig, uav_xyz: str, sbs_list: list[str]) -> int:
    if not sbs_list:
        raise ConfigError("linkbudget needs at least one --sbs x,y")
    params = cfg.channel_params()
    env_cfg = cfg.env_config()
    uav = geometry.vec3(*_parse_xyz(uav_xyz, 3))
    uav_array = ArrayAntennaConfig(cfg.uav_n_side, cfg.spacing_over_lambda,
                                   params.carrier_hz)
    links = []
    for i, text in enumerate(sbs_list):
        x, y = _parse_xyz(text, 2)
        try:
            links.append(LinkState(geometry.vec3(x, y, 0.0), env_cfg.tx_power_w,
                                   uav_array, cfg.sbs_n_side))
        except InvalidInputError as exc:
            raise ConfigError(f"link {i + 1}: {exc}") from exc
    try:
        sample = channel.instantaneous_sinr(links, uav, (0.0, 0.0), params)
    except InvalidInputError as exc:
        raise ConfigError(f"degenerate geometry: {exc}") from exc
    g0_uav = normalization_constant(uav_array)
    g0_sbs = normalization_constant(ArrayAntennaConfig(cfg.sbs_n_side,
                                                       cfg.spacing_over_lambda,
                                                       params.carrier_hz))
    print(f"uav: ({uav[0]:g}, {uav[1]:g}, {uav[2]:g})   "
          f"carrier {cfg.carrier_ghz:g} GHz   threshold {cfg.sinr_threshold_db:g} dB")
    header = (f"{'link':>4} {'length_m':>10} {'elev_deg':>9} {'p_los':>7} "
              f"{'freespace_db':>13} {'pathloss_db':>12} {'gain_db':>9} "
              f"{'intf_dbm':>10} {'sinr_db':>8}  verdict")
    print(header)
    noise = params.noise_power_w
    for i, lk in enumerate(links):
        length = geometry.link_length(uav, lk.sbs_position)
        elev = geometry.elevation_angle(uav, lk.sbs_position)
        p_los = channel.los_probability(params, elev)
        hlf = channel.free_space_term(params, length)
        pl2 = channel.path_loss(params, length)
        sinr = sample.per_link_sinr[i]
        signal = (lk.tx_power_w * pl2 * g0_sbs * g0_uav)
        interference = signal / sinr - noise if sinr > 0 else np.inf
        verdict = "pass" if sinr >= params.sinr_threshold else "FAIL"
        intf_dbm = 10 * np.log10(max(interference, 1e-300) * 1e3)
        print(f"{i + 1:>4} {length:>10.3f} {np.degrees(elev):>9.3f} {p_los:>7.4f} "
              f"{10 * np.log10(hlf):>13.2f} {10 * np.log10(pl2):>12.2f} "
              f"{10 * np.log10(g0_sbs * g0_uav):>9.2f} {intf_dbm:>10.2f} "
              f"{10 * np.log10(sinr):>8.2f}  {verdict}")
    return EXIT_OK


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavthz",
                                     description="UAV THz fronthaul simulator and trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_dir=True):
        p.add_argument("--config", type=Path, default=None,
                       help="flat key=value config file (defaults apply if omitted)")
        p.add_argument("--seed", type=int, default=0)
        if out_dir:
            p.add_argument("--out-dir", type=Path, required=True)
        p.add_argument("--mc-samples", type=int, default=None,
                       help="override the Monte-Carlo sample count")

    p_train = sub.add_parser("train", help="train a policy and write the reward table")
    common(p_train)

    p_eval = sub.add_parser("eval", help="greedy rollout of a trained policy")
    common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_eval.add_argument("--scenario-seed", type=int, default=None,
                        help="topology seed (defaults to --seed)")

    p_base = sub.add_parser("baseline", help="grid-search oracle and static-center scan")
    common(p_base)
    p_base.add_argument("--scenario-seed", type=int, default=None)

    p_link = sub.add_parser("linkbudget", help="one-shot per-link budget report")
    common(p_link, out_dir=False)
    p_link.add_argument("--uav", required=True, help="x,y,z in meters")
    p_link.add_argument("--sbs", action="append", default=[], help="x,y in meters (repeat)")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config is not None else RunConfig()
    if getattr(args, "mc_samples", None):
        cfg.mc_samples_train = args.mc_samples
        cfg.mc_samples_eval = args.mc_samples
        cfg.grid_mc_samples = args.mc_samples
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "linkbudget":
            return cmd_linkbudget(cfg, args.uav, args.sbs)
        out_dir = args.out_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "train":
            return cmd_train(cfg, args.seed, out_dir)
        scenario = args.scenario_seed if args.scenario_seed is not None else args.seed
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint, scenario, out_dir)
        if args.command == "baseline":
            return cmd_baseline(cfg, scenario, out_dir, args.mc_samples)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
