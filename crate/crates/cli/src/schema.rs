//! The published JSON Schema for scenario files.

use serde_json::{json, Value};

pub fn scenario_schema() -> Value {
    let matrix = json!({
        "oneOf": [
            { "type": "number", "description": "real multiple of the identity" },
            {
                "type": "array",
                "description": "row-major rows of [re, im] pairs",
                "items": { "type": "array", "items": {
                    "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2
                } }
            }
        ]
    });
    let grid = json!({ "type": "array", "items": { "type": "number" }, "minItems": 1 });
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "secscat scenario",
        "type": "object",
        "required": ["kind"],
        "additionalProperties": false,
        "properties": {
            "kind": { "enum": ["propagate", "dyson", "secondary", "uv", "commute", "witness"] },
            "epsilon": { "type": "number", "default": 1.0 },
            "tol": { "type": "number", "exclusiveMinimum": 0 },
            "seed": { "type": "integer", "minimum": 0, "default": 0 },
            "format": { "enum": ["csv", "json"], "default": "csv" },
            "family": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "dim": { "type": "integer", "minimum": 1 },
                    "c_plus": matrix, "b_plus": matrix, "c_minus": matrix, "b_minus": matrix,
                    "nu": { "type": "number", "exclusiveMinimum": 1, "default": 2.0 },
                    "u": {
                        "type": "object",
                        "required": ["catalog"],
                        "additionalProperties": false,
                        "properties": {
                            "catalog": { "enum": ["inverse_square", "power", "gaussian", "zero"] },
                            "amplitude": { "type": "number", "default": 1.0 },
                            "width": { "type": "number", "exclusiveMinimum": 0, "default": 1.0 },
                            "shape": matrix
                        }
                    }
                }
            },
            "interval": {
                "type": "object",
                "required": ["tau", "t"],
                "additionalProperties": false,
                "properties": { "tau": { "type": "number" }, "t": { "type": "number" } }
            },
            "order": { "type": "integer", "minimum": 1, "maximum": 64, "default": 12 },
            "ladder": {
                "type": "object",
                "required": ["start", "cap"],
                "additionalProperties": false,
                "properties": {
                    "start": { "type": "number", "minimum": 1 },
                    "cap": { "type": "number", "minimum": 1 }
                }
            },
            "truncations": grid,
            "uv": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "ell": {
                        "type": "object",
                        "required": ["form", "value"],
                        "additionalProperties": false,
                        "properties": {
                            "form": { "enum": ["shifted_square", "constant"] },
                            "value": { "type": "number" }
                        }
                    },
                    "m_bound": { "type": "number", "exclusiveMinimum": 0, "default": 1.0 },
                    "mu": { "type": "integer", "minimum": 1, "maximum": 4, "default": 1 },
                    "kernel": { "enum": ["linear", "superficial"], "default": "linear" },
                    "angular_orders": {
                        "type": "array", "items": { "type": "integer", "minimum": 8 },
                        "minItems": 3, "maxItems": 3
                    },
                    "q_grid": {
                        "type": "array",
                        "items": { "type": "array", "items": { "type": "number" }, "minItems": 4, "maxItems": 4 }
                    }
                }
            },
            "commute": {
                "type": "object",
                "additionalProperties": false,
                "properties": {
                    "model_dim": { "type": "integer", "minimum": 1 },
                    "a0": matrix, "c_plus": matrix, "c_minus": matrix, "scattering": matrix,
                    "t_grid": grid, "tau_grid": grid,
                    "tau": { "type": "number", "default": 1.0 }
                }
            }
        }
    })
}
