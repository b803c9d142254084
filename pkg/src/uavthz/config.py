"""Run configuration: one flat key = value text file covering every module.

Interface units are operator-friendly (dBm for powers, degrees for the
vibration std, GHz for the carrier) and are converted to SI when the
simulation objects are built. Unknown keys are rejected by name.
"""

from dataclasses import dataclass, fields

import numpy as np

from uavthz.channel import ChannelParams
from uavthz.environment import EnvConfig
from uavthz.errors import ConfigError
from uavthz.geometry import KinematicLimits
from uavthz.td3 import Normalizer, Td3Hyperparams


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class RunConfig:
    # service area and station dynamics
    area_x_m: float = 150.0
    area_y_m: float = 150.0
    m_s_min: int = 2
    m_s_max: int = 6
    m_d_max: int = 2
    t_min_s: float = 20.0
    t_max_s: float = 35.0
    # radio and channel
    carrier_ghz: float = 140.0
    tx_power_dbm: float = 10.0
    absorption_per_m: float = 1e-3
    noise_power_dbm: float = -190.0
    sinr_threshold_db: float = 5.0
    los_alpha: float = 9.61
    los_b: float = 0.16
    nlos_extra_loss: float = 0.01
    vibration_std_deg: float = 2.0
    los_mode: str = "per-sample"
    # antennas
    uav_n_side: int = 20
    sbs_n_side: int = 10
    spacing_over_lambda: float = 0.5
    # kinematics
    v_max_mps: float = 8.0
    a_max_mps2: float = 4.0
    h_min_m: float = 30.0
    h_max_m: float = 130.0
    dt_s: float = 1.0
    # environment scoring
    mc_samples_train: int = 500
    mc_samples_eval: int = 100_000
    reward_floor: float = 1e-9
    outage_alarm_threshold: float = 0.1
    clamp_horizontal: bool = False
    clamp_z_only: bool = False
    freeze_topology: bool = True
    # agent
    hidden1: int = 256
    hidden2: int = 128
    actor_lr: float = 1e-4
    critic_lr: float = 1e-4
    discount: float = 0.9
    tau: float = 0.01
    policy_delay: int = 2
    batch_size: int = 32
    buffer_capacity: int = 1000
    episodes: int = 150
    steps_per_episode: int = 10
    exploration_noise: float = 0.1
    target_noise: float = 0.2
    target_noise_clip: float = 0.5
    warmup_steps: int = 256
    # baseline oracle
    grid_x: int = 15
    grid_y: int = 15
    grid_z: int = 5
    grid_mc_samples: int = 10_000

    # ------------------------------------------------------------------ builders

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            carrier_hz=self.carrier_ghz * 1e9,
            absorption_coeff=self.absorption_per_m,
            noise_power_w=dbm_to_watts(self.noise_power_dbm),
            sinr_threshold=db_to_linear(self.sinr_threshold_db),
            los_alpha=self.los_alpha,
            los_b=self.los_b,
            nlos_extra_loss=self.nlos_extra_loss,
            vibration_std_rad=float(np.deg2rad(self.vibration_std_deg)),
            los_mode=self.los_mode,
        )

    def kinematic_limits(self) -> KinematicLimits:
        return KinematicLimits(self.v_max_mps, self.a_max_mps2, self.h_min_m, self.h_max_m)

    def env_config(self) -> EnvConfig:
        return EnvConfig(
            area_x=self.area_x_m, area_y=self.area_y_m,
            m_s_min=self.m_s_min, m_s_max=self.m_s_max, m_d_max=self.m_d_max,
            t_min=self.t_min_s, t_max=self.t_max_s, dt=self.dt_s,
            limits=self.kinematic_limits(),
            tx_power_w=dbm_to_watts(self.tx_power_dbm),
            uav_n_side=self.uav_n_side, sbs_n_side=self.sbs_n_side,
            spacing_over_lambda=self.spacing_over_lambda,
            mc_samples=self.mc_samples_train,
            reward_floor=self.reward_floor,
            outage_alarm_threshold=self.outage_alarm_threshold,
            clamp_horizontal=self.clamp_horizontal,
            clamp_z_only=self.clamp_z_only,
            freeze_topology=self.freeze_topology,
        )

    def hyperparams(self) -> Td3Hyperparams:
        return Td3Hyperparams(
            hidden_dims=(self.hidden1, self.hidden2),
            actor_lr=self.actor_lr, critic_lr=self.critic_lr,
            discount=self.discount, tau=self.tau, policy_delay=self.policy_delay,
            batch_size=self.batch_size, buffer_capacity=self.buffer_capacity,
            exploration_noise_std=self.exploration_noise,
            target_noise_std=self.target_noise,
            target_noise_clip=self.target_noise_clip,
            warmup_steps=self.warmup_steps,
            episodes=self.episodes, steps_per_episode=self.steps_per_episode,
        )

    def normalizer(self) -> Normalizer:
        return Normalizer(self.area_x_m, self.area_y_m, self.h_min_m, self.h_max_m,
                          self.env_config().action_scale)

    def grid_spec(self, seed: int):
        from uavthz.baseline import GridSearchSpec
        return GridSearchSpec(self.grid_x, self.grid_y, self.grid_z,
                              (0.0, self.area_x_m), (0.0, self.area_y_m),
                              (self.h_min_m, self.h_max_m),
                              self.grid_mc_samples, seed)


# Dotted config key -> dataclass field. Sections group related knobs; the
# mapping is the single source of truth for parsing and serialization.
_KEY_TO_FIELD = {
    "area.x_m": "area_x_m",
    "area.y_m": "area_y_m",
    "topology.m_s_min": "m_s_min",
    "topology.m_s_max": "m_s_max",
    "topology.m_d_max": "m_d_max",
    "topology.t_min_s": "t_min_s",
    "topology.t_max_s": "t_max_s",
    "channel.carrier_ghz": "carrier_ghz",
    "channel.tx_power_dbm": "tx_power_dbm",
    "channel.absorption_per_m": "absorption_per_m",
    "channel.noise_power_dbm": "noise_power_dbm",
    "channel.sinr_threshold_db": "sinr_threshold_db",
    "channel.los_alpha": "los_alpha",
    "channel.los_b": "los_b",
    "channel.nlos_extra_loss": "nlos_extra_loss",
    "channel.vibration_std_deg": "vibration_std_deg",
    "channel.los_mode": "los_mode",
    "antenna.uav_n_side": "uav_n_side",
    "antenna.sbs_n_side": "sbs_n_side",
    "antenna.spacing_over_lambda": "spacing_over_lambda",
    "kinematics.v_max_mps": "v_max_mps",
    "kinematics.a_max_mps2": "a_max_mps2",
    "kinematics.h_min_m": "h_min_m",
    "kinematics.h_max_m": "h_max_m",
    "kinematics.dt_s": "dt_s",
    "env.mc_samples_train": "mc_samples_train",
    "env.mc_samples_eval": "mc_samples_eval",
    "env.reward_floor": "reward_floor",
    "env.outage_alarm_threshold": "outage_alarm_threshold",
    "env.clamp_horizontal": "clamp_horizontal",
    "env.clamp_z_only": "clamp_z_only",
    "env.freeze_topology": "freeze_topology",
    "td3.hidden1": "hidden1",
    "td3.hidden2": "hidden2",
    "td3.actor_lr": "actor_lr",
    "td3.critic_lr": "critic_lr",
    "td3.discount": "discount",
    "td3.tau": "tau",
    "td3.policy_delay": "policy_delay",
    "td3.batch_size": "batch_size",
    "td3.buffer_capacity": "buffer_capacity",
    "td3.episodes": "episodes",
    "td3.steps_per_episode": "steps_per_episode",
    "td3.exploration_noise": "exploration_noise",
    "td3.target_noise": "target_noise",
    "td3.target_noise_clip": "target_noise_clip",
    "td3.warmup_steps": "warmup_steps",
    "baseline.grid_x": "grid_x",
    "baseline.grid_y": "grid_y",
    "baseline.grid_z": "grid_z",
    "baseline.mc_samples": "grid_mc_samples",
}

_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, field_name: str, raw: str):
    ftype = _FIELD_TYPES[field_name]
    raw = raw.strip()
    try:
        if ftype in (bool, "bool"):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if ftype in (int, "int"):
            return int(raw)
        if ftype in (float, "float"):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse flat `section.key = value` lines; '#' starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"unknown config key: {key}")
        field_name = _KEY_TO_FIELD[key]
        if field_name in values:
            raise ConfigError(f"duplicate config key: {key}")
        values[field_name] = _parse_value(key, field_name, raw)
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    lines = []
    section = None
    for f in fields(RunConfig):
        key = _FIELD_TO_KEY[f.name]
        sec = key.split(".", 1)[0]
        if sec != section:
            if section is not None:
                lines.append("")
            section = sec
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
