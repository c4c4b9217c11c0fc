import os

from dotenv import load_dotenv
from flask import Flask, request, jsonify
from werkzeug.middleware.proxy_fix import ProxyFix

from plugins.common.errors import ValidationError
from plugins.common.logging_config import configure_logging
from plugins.common.serialization import json_safe
from plugins.common.validation import validate_parameters
from plugins.registry import PLUGINS, describe_plugin, run_plugin

load_dotenv()
logger = configure_logging()

app = Flask(__name__)
app.config['MAX_CONTENT_LENGTH'] = 16 * 1024 * 1024  # 16MB max upload

# Add proxy fix for proper IP handling behind reverse proxies
app.wsgi_app = ProxyFix(app.wsgi_app, x_for=1, x_proto=1, x_host=1)


@app.route("/api/plugins", methods=["GET"])
def api_plugins():
    """Return the available commands grouped by category."""
    categories = {}
    for key, plugin in PLUGINS.items():
        categories.setdefault(plugin.get("category", "other"), []).append(describe_plugin(key))
    return jsonify(categories)


@app.route("/api/plugin/<plugin_key>", methods=["GET"])
def api_plugin(plugin_key):
    """Return details for a specific command."""
    if plugin_key not in PLUGINS:
        return jsonify({"error": "Plugin not found"}), 404
    return jsonify(describe_plugin(plugin_key))


@app.route("/api/run/<plugin_key>", methods=["POST"])
def api_run_plugin(plugin_key):
    """Run a command; the body is a JSON object of parameters."""
    if plugin_key not in PLUGINS:
        return jsonify({"error": "Plugin not found"}), 404
    params = request.get_json(silent=True)
    if params is not None and not isinstance(params, dict):
        return jsonify({"output": None, "log": None, "error": "Parameters must be a JSON object"}), 400
    result = run_plugin(plugin_key, params or {})
    status = 200 if result["error"] is None else 400
    return jsonify(result), status


@app.route("/api/validate/<plugin_key>", methods=["POST"])
def api_validate(plugin_key):
    """Validate parameters for a specific command without running it."""
    if plugin_key not in PLUGINS:
        return jsonify({"error": "Plugin not found"}), 404
    try:
        params = validate_parameters(PLUGINS[plugin_key]["parameters"], request.get_json(silent=True) or {})
        return jsonify({"status": "valid", "params": json_safe(params)})
    except ValidationError as e:
        return jsonify({"status": "invalid", "error": e.message,
                        "param_info": e.param_info, "suggestion": e.suggestion}), 400


@app.errorhandler(404)
def page_not_found(e):
    return jsonify({"error": "Not found"}), 404


@app.errorhandler(500)
def server_error(e):
    logger.error(f"Server error: {e}")
    return jsonify({"error": "Server error"}), 500


if __name__ == "__main__":
    app.run(debug=os.environ.get('FLASK_ENV') != 'production', host='0.0.0.0',
            port=int(os.environ.get('PORT', 5000)))
