"""JSON instance files and JSON-lines dataset files.

Instance file keys: ``num_states, num_actions, horizon, feature_dim,
features [s][a][i], factor_measures [h][i][s'], reward_params [h][i],
reward_noise_std, uncertainty_levels [h], initial_distribution [s]`` and an
optional ``metadata`` object.

Dataset file: a header object ``{"K", "H", "seed", "sources"?}`` followed by
one object per transition with keys ``k, h, s, a, r, s_next`` (``k`` is
0-based, ``h`` runs 1..H).
"""

import json

import numpy as np

from .mdp import InstanceError, OfflineDataset, TabularLinearDRMDP

INSTANCE_KEYS = (
    "num_states",
    "num_actions",
    "horizon",
    "feature_dim",
    "features",
    "factor_measures",
    "reward_params",
    "reward_noise_std",
    "uncertainty_levels",
    "initial_distribution",
)


def instance_to_dict(mdp):
    out = {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "horizon": mdp.horizon,
        "feature_dim": mdp.feature_dim,
        "features": mdp.features.tolist(),
        "factor_measures": mdp.factor_measures.tolist(),
        "reward_params": mdp.reward_params.tolist(),
        "reward_noise_std": mdp.reward_noise_std,
        "uncertainty_levels": mdp.uncertainty_levels.tolist(),
        "initial_distribution": mdp.initial_distribution.tolist(),
    }
    if mdp.metadata:
        out["metadata"] = mdp.metadata
    return out


def instance_from_dict(data):
    missing = [k for k in INSTANCE_KEYS if k not in data]
    if missing:
        raise InstanceError(f"instance file missing keys: {', '.join(missing)}")
    unknown = set(data) - set(INSTANCE_KEYS) - {"metadata"}
    if unknown:
        raise InstanceError(f"instance file has unknown keys: {', '.join(sorted(unknown))}")
    try:
        mdp = TabularLinearDRMDP(
            features=np.array(data["features"], dtype=np.float64),
            factor_measures=np.array(data["factor_measures"], dtype=np.float64),
            reward_params=np.array(data["reward_params"], dtype=np.float64),
            reward_noise_std=data["reward_noise_std"],
            uncertainty_levels=np.array(data["uncertainty_levels"], dtype=np.float64),
            initial_distribution=np.array(data["initial_distribution"], dtype=np.float64),
            metadata=data.get("metadata", {}),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"malformed instance: {exc}") from exc
    declared = (data["num_states"], data["num_actions"], data["horizon"], data["feature_dim"])
    actual = (mdp.num_states, mdp.num_actions, mdp.horizon, mdp.feature_dim)
    for name, want, got in zip(INSTANCE_KEYS[:4], declared, actual):
        if want != got:
            raise InstanceError(f"{name}: declared {want} but arrays imply {got}")
    return mdp


def save_instance(mdp, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(instance_to_dict(mdp), f)
        f.write("\n")


def load_instance(path):
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(data)


def save_dataset(dataset, path):
    with open(path, "w", encoding="utf-8") as f:
        header = {
            "K": dataset.num_trajectories,
            "H": dataset.horizon,
            "seed": dataset.seed,
            "sources": [list(x) if isinstance(x, tuple) else x for x in dataset.sources],
        }
        f.write(json.dumps(header) + "\n")
        for k, h, s, a, r, s_next in dataset.transitions():
            f.write(json.dumps({"k": k, "h": h, "s": s, "a": a, "r": r, "s_next": s_next}) + "\n")


def load_dataset(path):
    with open(path, encoding="utf-8") as f:
        lines = [line for line in f if line.strip()]
    if not lines:
        raise InstanceError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
        K, H = int(header["K"]), int(header["H"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"{path}: bad header line ({exc})") from exc
    states = np.full((K, H + 1), -1, dtype=np.int64)
    actions = np.full((K, H), -1, dtype=np.int64)
    rewards = np.zeros((K, H))
    seen = np.zeros((K, H), dtype=bool)
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
            k, h = int(rec["k"]), int(rec["h"])
            s, a, r, sn = int(rec["s"]), int(rec["a"]), float(rec["r"]), int(rec["s_next"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"{path}:{lineno}: malformed transition ({exc})") from exc
        if not (0 <= k < K and 1 <= h <= H):
            raise InstanceError(f"{path}:{lineno}: (k={k}, h={h}) outside K={K}, H={H}")
        if seen[k, h - 1]:
            raise InstanceError(f"{path}:{lineno}: duplicate step h={h} in trajectory {k}")
        seen[k, h - 1] = True
        if states[k, h - 1] not in (-1, s):
            raise InstanceError(f"trajectory {k}: state at h={h} disagrees with s_next at h={h - 1}")
        if states[k, h] not in (-1, sn):
            raise InstanceError(f"trajectory {k}: s_next at h={h} disagrees with state at h={h + 1}")
        states[k, h - 1], states[k, h] = s, sn
        actions[k, h - 1] = a
        rewards[k, h - 1] = r
    missing = np.argwhere(~seen)
    if missing.size:
        k, h = missing[0]
        raise InstanceError(f"trajectory {k} is missing step h={h + 1}")
    sources = header.get("sources")
    sources = tuple(tuple(x) if isinstance(x, list) else x for x in sources) if sources else ()
    return OfflineDataset(states=states, actions=actions, rewards=rewards, seed=header.get("seed"), sources=sources)


def check_dataset_against(dataset, mdp):
    """Raise if the dataset indices do not fit the instance."""
    if dataset.horizon != mdp.horizon:
        raise InstanceError(f"dataset horizon {dataset.horizon} != instance horizon {mdp.horizon}")
    if dataset.num_trajectories:
        if dataset.states.min() < 0 or dataset.states.max() >= mdp.num_states:
            raise InstanceError("dataset state index out of range")
        if dataset.actions.min() < 0 or dataset.actions.max() >= mdp.num_actions:
            raise InstanceError("dataset action index out of range")
