"""
Schema-driven parameter validation shared by the command registry, the HTTP
API and the experiment configs.

A schema is a list of entries ``{"name", "type", "default", "min", "max",
"options", "description"}``; ``type`` is one of int, float, bool, str,
select, list or dict.
"""
from plugins.common.errors import ValidationError


def _check_range(param, name, val):
    if "min" in param and val < param["min"]:
        raise ValidationError(
            f"Value for {name} is too small",
            param_info=f"{name} = {val}",
            suggestion=f"Minimum allowed value is {param['min']}."
        )
    if "max" in param and val > param["max"]:
        raise ValidationError(
            f"Value for {name} is too large",
            param_info=f"{name} = {val}",
            suggestion=f"Maximum allowed value is {param['max']}."
        )
    return val


def _coerce(param, name, raw_val):
    kind = param["type"]
    if kind == "int":
        if isinstance(raw_val, bool) or (isinstance(raw_val, float) and not raw_val.is_integer()):
            raise ValidationError(f"Invalid integer value for {name}", param_info=f"Received: {raw_val}",
                                  suggestion="Please provide a valid integer value.")
        try:
            return _check_range(param, name, int(raw_val))
        except (TypeError, ValueError):
            raise ValidationError(f"Invalid integer value for {name}", param_info=f"Received: {raw_val}",
                                  suggestion="Please provide a valid integer value.")
    if kind == "float":
        try:
            return _check_range(param, name, float(raw_val))
        except (TypeError, ValueError):
            raise ValidationError(f"Invalid float value for {name}", param_info=f"Received: {raw_val}",
                                  suggestion="Please provide a valid decimal number.")
    if kind == "bool":
        if isinstance(raw_val, bool):
            return raw_val
        if isinstance(raw_val, str) and raw_val.lower() in ("true", "false"):
            return raw_val.lower() == "true"
        raise ValidationError(f"Invalid boolean value for {name}", param_info=f"Received: {raw_val}",
                              suggestion="Please provide 'true' or 'false'.")
    if kind in ("str", "select"):
        raw_val = raw_val if isinstance(raw_val, str) else str(raw_val)
        if "options" in param and raw_val not in param["options"]:
            raise ValidationError(f"Invalid option for {name}", param_info=f"Received: {raw_val}",
                                  suggestion=f"Allowed options are: {', '.join(param['options'])}")
        return raw_val
    if kind == "list":
        if not isinstance(raw_val, (list, tuple)):
            raise ValidationError(f"Expected a list for {name}", param_info=f"Received: {raw_val!r}")
        if "options" in param:
            bad = [v for v in raw_val if v not in param["options"]]
            if bad:
                raise ValidationError(f"Invalid entries for {name}", param_info=f"Received: {bad}",
                                      suggestion=f"Allowed entries are: {', '.join(param['options'])}")
        return list(raw_val)
    if kind == "dict":
        if not isinstance(raw_val, dict):
            raise ValidationError(f"Expected an object for {name}", param_info=f"Received: {raw_val!r}")
        return dict(raw_val)
    return raw_val


def validate_parameters(schema, params, allow_unknown=False):
    """
    Validate and coerce ``params`` against a parameter schema.

    Args:
        schema: List of parameter entries
        params: Mapping of received values (None counts as empty)
        allow_unknown: Pass through keys the schema does not name

    Returns:
        Dictionary of validated values with defaults filled in

    Raises:
        ValidationError: missing required value, bad type, out of range
    """
    params = dict(params or {})
    known = {p["name"] for p in schema}
    unknown = sorted(set(params) - known)
    if unknown and not allow_unknown:
        raise ValidationError(
            f"Unknown parameter: {unknown[0]}",
            param_info=f"Received keys: {', '.join(unknown)}",
            suggestion=f"Known parameters are: {', '.join(sorted(known))}"
        )

    validated_params = {k: params[k] for k in unknown}
    for param in schema:
        name = param["name"]
        if name not in params or params[name] is None:
            if "default" not in param:
                raise ValidationError(
                    f"Missing required parameter: {name}",
                    param_info=f"{name} ({param['type']})",
                    suggestion="Please provide a value for this required parameter."
                )
            validated_params[name] = param["default"]
            continue
        validated_params[name] = _coerce(param, name, params[name])
    return validated_params
