from flask import Blueprint, request, jsonify, current_app
import numpy as np

from tfoc.core.errors import ValidationError
from tfoc.models import OperatorMatrix, Signal
from tfoc.services.corpus import SignalSpec
from tfoc.services.grid import make_grid
from tfoc.services.harness_service import build_bundle, config_hash, parse_config, run_experiments, to_jsonable
from tfoc.services.modspace import MixedNormSpec, mod_norm
from tfoc.services.schatten import schatten_norms
from tfoc.services.stft import gaussian_window
from tfoc.services.weights import parse_weight

tools_bp = Blueprint('tools', __name__)


def _payload():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise ValidationError("Request body must be a JSON object")
    return data


def _complex_array(data, label):
    """A list of reals, or an object with 'real' and 'imag' lists."""
    try:
        if isinstance(data, dict):
            return np.asarray(data["real"], dtype=float) + 1j * np.asarray(data.get("imag", 0.0), dtype=float)
        return np.asarray(data, dtype=float).astype(complex)
    except (KeyError, TypeError, ValueError):
        raise ValidationError(f"'{label}' must be a list of numbers or an object with 'real' and 'imag'")


def _grid(data):
    try:
        return make_grid(int(data.get("N", 0)))
    except (TypeError, ValueError):
        raise ValidationError("'N' must be an even integer")


@tools_bp.route('', methods=['GET'])
def get_available_tools():
    """Return tool definitions for the service endpoints."""
    tools = [
        {
            "name": "mod_norm",
            "description": "Weighted modulation-space norm of a signal on the periodic grid",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "N": {"type": "integer", "description": "Even grid size >= 8"},
                    "values": {"type": ["array", "object"], "description": "Real samples or {real, imag}"},
                    "gaussian": {"type": "object", "description": "Gaussian packet {width, center, modulation}"},
                    "p": {"type": ["number", "string"]},
                    "q": {"type": ["number", "string"]},
                    "weight": {"type": "string", "description": "Weight descriptor, e.g. bracket_power(1)"}
                },
                "required": ["N"]
            }
        },
        {
            "name": "schatten",
            "description": "Singular values and Schatten norms of a kernel operator",
            "inputSchema": {
                "type": "object",
                "properties": {
                    "N": {"type": "integer"},
                    "kernel": {"type": ["array", "object"], "description": "N x N kernel entries, real or {real, imag}"}
                },
                "required": ["N", "kernel"]
            }
        },
        {
            "name": "run",
            "description": "Run experiments from an inline configuration",
            "inputSchema": {
                "type": "object",
                "properties": {"experiments": {"type": "array"}},
                "required": ["experiments"]
            }
        }
    ]

    return jsonify({
        "tools": tools,
        "capabilities": {
            "tools": {
                "listChanged": False
            }
        }
    })


@tools_bp.route('/norm', methods=['POST'])
def compute_norm():
    """Compute ||f||_{M^{p,q}(omega)} with the default Gaussian window."""
    data = _payload()
    grid = _grid(data)
    if "values" in data:
        signal = Signal(_complex_array(data["values"], "values"), grid)
    elif "gaussian" in data:
        params = data["gaussian"]
        if not isinstance(params, dict):
            raise ValidationError("'gaussian' must be an object")
        try:
            signal = SignalSpec(**{k: float(v) for k, v in params.items()}).sample(grid)
        except (TypeError, ValueError):
            raise ValidationError("'gaussian' takes numeric width, center and modulation")
    else:
        raise ValidationError("Provide 'values' or 'gaussian'")
    spec = MixedNormSpec(data.get("p", 2), data.get("q", data.get("p", 2)),
                         parse_weight(data.get("weight", "one"), 2))
    value = mod_norm(signal, gaussian_window(grid), spec)
    return jsonify(to_jsonable({"norm": value, "spec": spec.to_dict(), "N": grid.n_points}))


@tools_bp.route('/schatten', methods=['POST'])
def compute_schatten():
    """Singular values and standard Schatten norms of h * K."""
    data = _payload()
    grid = _grid(data)
    if "kernel" not in data:
        raise ValidationError("Missing 'kernel'")
    operator = OperatorMatrix(_complex_array(data["kernel"], "kernel"), grid)
    return jsonify(to_jsonable(schatten_norms(operator).to_dict()))


@tools_bp.route('/run', methods=['POST'])
def run_inline_experiments():
    """Run an inline experiment configuration and return the report bundle."""
    data = _payload()
    configs = parse_config(data)
    reports, _ = run_experiments(configs, current_app.config.get('WORKERS'))
    bundle = build_bundle(reports, config_hash(data))
    return jsonify(to_jsonable(bundle))
