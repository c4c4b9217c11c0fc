"""
Command registry shared by the command line and the HTTP API.

Each entry names a runner, its parameter schema and a category. Runners
return dictionaries with a "log" key; ``run_plugin`` turns them (or any
error they raise) into ``{"output", "log", "error"}``.
"""
import os
import logging
import traceback
import concurrent.futures

from plugins.common.errors import BoundError, ValidationError, InvariantViolation
from plugins.common.resources import check_memory_usage
from plugins.common.serialization import json_safe
from plugins.common.validation import validate_parameters
from plugins.bounds_finite.bounds_finite import run_exact_report, run_fano, run_improved_constant
from plugins.bounds_finite.problems import problem_from_dict
from plugins.baselines.baselines import run_lipschitz
from plugins.mc_lab.mc_lab import run_ld_bound, run_compare, run_theta_opt

logger = logging.getLogger(__name__)


def verify_exact(problem=None, k=2, bits=False):
    return run_exact_report(problem_from_dict(problem or {"kind": "identity"}), k=k, bits=bits)


_EXPERIMENT_PARAMETERS = [
    {"name": "config", "type": "dict", "default": {}, "description": "Experiment config (see configs/desk_ld.json)"},
    {"name": "seed", "type": "int", "default": None, "min": 0, "description": "Master seed override"},
    {"name": "threads", "type": "int", "default": None, "min": 1, "max": 256, "description": "Worker threads"},
    {"name": "out", "type": "str", "default": None, "description": "Output directory"},
    {"name": "theta", "type": "str", "default": None, "description": "Decision function kind[:a]"},
    {"name": "baselines", "type": "list", "default": None, "description": "Baselines to evaluate"},
    {"name": "dump_trajectories", "type": "bool", "default": False,
     "description": "Write every trajectory as .npz plus a per-iterate CSV"},
    {"name": "records_csv", "type": "bool", "default": False, "description": "Write the per-step records CSV"},
]

PLUGINS = {
    "verify-exact": {
        "name": "Exact Bound Verification",
        "description": "Enumerate a finite learning problem and verify every information-theoretic bound exactly.",
        "category": "exact",
        "parameters": [
            {"name": "problem", "type": "dict", "default": {"kind": "identity"},
             "description": "Problem config (kind: table, constant, identity, randomized_response, memorizing_mixture)"},
            {"name": "k", "type": "int", "default": 2, "min": 2, "max": 16, "description": "Supersample rows"},
            {"name": "bits", "type": "bool", "default": False, "description": "Also report in bits"},
        ],
        "function": verify_exact,
    },
    "ld-bound": {
        "name": "Langevin Dynamics Bound",
        "description": "Monte Carlo estimate of the hypothesis-testing CMI bound along a Langevin run.",
        "category": "langevin",
        "parameters": _EXPERIMENT_PARAMETERS,
        "function": run_ld_bound,
    },
    "compare": {
        "name": "Bound Comparison",
        "description": "Langevin bound curves next to the Lipschitz and data-dependent baselines.",
        "category": "langevin",
        "parameters": _EXPERIMENT_PARAMETERS,
        "function": run_compare,
    },
    "theta-opt": {
        "name": "Decision Function Tuning",
        "description": "Tune the decision function on even repetitions and report it on odd ones.",
        "category": "langevin",
        "parameters": _EXPERIMENT_PARAMETERS,
        "function": run_theta_opt,
    },
    "fano": {
        "name": "Fano Lower Bound",
        "description": "Lower bound on the error of any membership-inference estimator.",
        "category": "formula",
        "parameters": [
            {"name": "cmi", "type": "float", "min": 0.0, "description": "CMI in nats"},
            {"name": "n", "type": "int", "min": 1, "description": "Sample size"},
            {"name": "k", "type": "int", "default": 2, "min": 2, "description": "Supersample rows"},
        ],
        "function": run_fano,
    },
    "improved-constant": {
        "name": "Improved-Constant Bound",
        "description": "Sharper-constant bound from CMI^k for k > 2.",
        "category": "formula",
        "parameters": [
            {"name": "cmi", "type": "float", "min": 0.0, "description": "CMI^k in nats"},
            {"name": "n", "type": "int", "min": 1, "description": "Sample size"},
            {"name": "k", "type": "int", "default": 3, "min": 3, "description": "Supersample rows"},
        ],
        "function": run_improved_constant,
    },
    "lipschitz": {
        "name": "Lipschitz Baselines",
        "description": "Gradient-norm and incoherence baselines under a constant schedule.",
        "category": "formula",
        "parameters": [
            {"name": "L", "type": "float", "min": 0.0, "description": "Lipschitz constant"},
            {"name": "n", "type": "int", "min": 2, "description": "Sample size"},
            {"name": "T", "type": "int", "default": 500, "min": 1, "description": "Iterations"},
            {"name": "eta", "type": "float", "default": 0.01, "min": 0.0, "description": "Step size"},
            {"name": "beta", "type": "float", "default": 1e4, "min": 0.0, "description": "Inverse temperature"},
        ],
        "function": run_lipschitz,
    },
}


def get_plugin(key):
    if key not in PLUGINS:
        raise ValidationError(f"Unknown command: {key}", suggestion=f"Available: {', '.join(PLUGINS)}")
    return PLUGINS[key]


def describe_plugin(key):
    """Serializable view of one registry entry."""
    plugin = get_plugin(key)
    return {
        "key": key,
        "name": plugin["name"],
        "description": plugin["description"],
        "category": plugin["category"],
        "parameters": json_safe(plugin["parameters"]),
    }


def invoke(key, params):
    """Validate ``params`` for ``key`` and call the runner, letting errors propagate."""
    plugin = get_plugin(key)
    validated = validate_parameters(plugin["parameters"], params)
    logger.info(f"Running {key} with parameters: {validated}")
    return plugin["function"](**validated)


def wrap_result(result):
    """
    Standardize a runner result into a dictionary with keys:
      - "output": All keys except "log"
      - "log": Detailed process log
      - "error": None if successful, or the error message.
    """
    if isinstance(result, dict):
        output = {k: v for k, v in result.items() if k != "log"}
        return {"output": json_safe(output), "log": result.get("log", ""), "error": None}
    return {"output": json_safe(result), "log": "", "error": None}


def run_plugin(key, params, timeout=None):
    """
    Run a registry entry and always return ``{"output", "log", "error"}``.

    Args:
        key: Registry key
        params: Raw parameters
        timeout: Seconds before giving up; CMIBOUND_API_TIMEOUT or 300 by default
    """
    if not check_memory_usage():
        return {
            "output": None,
            "log": "Server is currently experiencing high memory usage. Please try again later.",
            "error": "Insufficient memory available. Try reducing problem size.",
        }
    timeout = timeout or float(os.environ.get("CMIBOUND_API_TIMEOUT", 300))
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=1)
    try:
        future = executor.submit(invoke, key, params)
        return wrap_result(future.result(timeout=timeout))
    except concurrent.futures.TimeoutError:
        return {
            "output": None,
            "log": f"{key} started but could not complete within {timeout:g} seconds.",
            "error": f"Execution timed out after {timeout:g} seconds. Try a smaller configuration.",
        }
    except InvariantViolation as e:
        logger.error(f"Invariant failure in {key}: {e.describe()}")
        return {"output": None, "log": None, "error": f"Invariant failure: {e.describe()}"}
    except ValidationError as e:
        logger.error(f"Parameter error in {key}: {e.describe()}")
        return {"output": None, "log": None, "error": f"Parameter error: {e.describe()}"}
    except BoundError as e:
        logger.error(f"Error in {key}: {e.describe()}")
        return {"output": None, "log": None, "error": e.describe()}
    except Exception as e:
        error_type = type(e).__name__
        logger.error(f"Error in {key}: {error_type} - {e}\n{traceback.format_exc()}")
        return {"output": None, "log": "Run failed. See error for details.", "error": f"Error ({error_type}): {e}"}
    finally:
        executor.shutdown(wait=False)
