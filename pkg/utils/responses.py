"""
Standardized response format for verification checks.

Every check in the oracle and verification suites returns a dict in this
shape so the CLI can render one pass/fail table regardless of which module
produced the check.
"""

from typing import Any, Optional


def pass_response(
    message: str,
    data: Optional[dict] = None,
    **fields: Any
) -> dict:
    """
    Create a passing check response.

    Args:
        message: Human-readable description of what was checked
        data: Margins and values behind the verdict (optional)
        **fields: Extra top-level fields (e.g. check name)

    Returns:
        Standardized pass response

    Example:
        >>> pass_response(
        ...     "tree-graph inequality k=2",
        ...     data={"lhs": 1.52, "rhs": 1.73, "margin": 0.21},
        ...     check="tree_graph",
        ... )
        {
            "success": True,
            "status": "pass",
            "message": "tree-graph inequality k=2",
            "data": {"lhs": 1.52, "rhs": 1.73, "margin": 0.21},
            "check": "tree_graph"
        }
    """
    response = {
        "success": True,
        "status": "pass",
        "message": message,
    }

    if data is not None:
        response["data"] = data

    response.update(fields)

    return response


def fail_response(
    message: str,
    data: Optional[dict] = None,
    **fields: Any
) -> dict:
    """
    Create a failing check response.

    Args:
        message: What was checked and how it failed
        data: Values and margins at the point of failure (optional)
        **fields: Extra top-level fields

    Returns:
        Standardized fail response
    """
    response = {
        "success": False,
        "status": "fail",
        "message": message,
    }

    if data is not None:
        response["data"] = data

    response.update(fields)

    return response


def not_applicable_response(
    message: str,
    data: Optional[dict] = None,
    **fields: Any
) -> dict:
    """
    Create a response for a check whose hypothesis does not hold.

    Not-applicable is not a failure: `success` stays True so a suite with
    skipped bounds still passes.
    """
    response = {
        "success": True,
        "status": "not_applicable",
        "message": message,
    }

    if data is not None:
        response["data"] = data

    response.update(fields)

    return response


def check_response(
    passed: bool,
    message: str,
    data: Optional[dict] = None,
    **fields: Any
) -> dict:
    """Pass or fail depending on `passed`."""
    if passed:
        return pass_response(message, data=data, **fields)
    return fail_response(message, data=data, **fields)


def error_to_response(check: str, exc: Exception) -> dict:
    """Turn an exception raised inside a check into a fail response."""
    return fail_response(
        f"{check} raised {type(exc).__name__}: {exc}",
        data={"exception": type(exc).__name__},
        check=check,
    )


def all_passed(responses: list[dict]) -> bool:
    return all(r.get("success", False) for r in responses)
