import logging
from typing import Any, Dict, Optional

import dash
import dash_bootstrap_components as dbc
from dash import Input, Output, State, callback, dcc, html

from utils.config import TASK_DEFAULTS, TASKS, TRAINERS

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

app = dash.Dash(
    external_stylesheets=[dbc.themes.BOOTSTRAP, dbc.icons.FONT_AWESOME], use_pages=True
)
app.title = "ELM Stream"
sidebar = html.Div(
    [
        dcc.Store(id="storage-main", storage_type="session"),
        html.Div(
            [
                html.H1("ELM"),
                html.H2("Stream", style={"padding-left": "6px"}),
            ],
            className="infoBox",
        ),
        html.Hr(),
        dbc.Nav(
            [
                dbc.NavLink(page["name"], href=page["relative_path"], active="exact")
                for page in dash.page_registry.values()
            ],
            vertical=True,
            pills=True,
            fill=False,
        ),
        html.Div(
            [
                html.Div(
                    [
                        dbc.Label("Task"),
                        dbc.Select(
                            options=[{"label": t.title(), "value": t} for t in TASKS],
                            value="identify",
                            required=True,
                            id="select-input-task",
                        ),
                    ],
                    className="numeric-input",
                ),
                html.Div(
                    [
                        dbc.Label("Trainer"),
                        dbc.Select(
                            options=[{"label": t, "value": t} for t in TRAINERS],
                            value="sgelm",
                            required=True,
                            id="select-input-trainer",
                        ),
                    ],
                    className="numeric-input",
                ),
                html.Div(
                    [
                        dbc.Label("# of Hidden Units (1-200)"),
                        dbc.Input(
                            type="number",
                            min=1,
                            max=200,
                            step=1,
                            value=TASK_DEFAULTS["identify"]["hidden_dim"],
                            id="numeric-input-hidden",
                        ),
                    ],
                    className="numeric-input",
                ),
                html.Div(
                    [
                        dbc.Label("Step Size"),
                        dbc.Input(
                            type="number",
                            min=0,
                            max=2,
                            value=TASK_DEFAULTS["identify"]["step"],
                            id="numeric-input-step",
                        ),
                    ],
                    className="numeric-input",
                ),
                html.Div(
                    [
                        dbc.Label("Seed"),
                        dbc.Input(
                            type="number",
                            min=0,
                            max=999,
                            step=1,
                            value=0,
                            id="numeric-input-seed",
                        ),
                    ],
                    className="numeric-input",
                ),
            ],
            className="preferencesBox",
        ),
        html.Hr(),
        html.Div(
            [
                dbc.Spinner(
                    [html.H6("", id="loading-state")],
                    color="primary",
                    type="grow",
                    id="loading-spinner",
                )
            ],
            className="spinnerBox",
        ),
    ],
    className="sidebar",
    id="page-sidebar",
)


@callback(
    [
        Output("numeric-input-hidden", "value"),
        Output("numeric-input-step", "value"),
    ],
    Input("select-input-task", "value"),
    prevent_initial_call=True,
)
def on_task_changed(task: str):
    """Resets hidden units and step size to the defaults of the chosen task."""
    defaults = TASK_DEFAULTS[task]
    return defaults["hidden_dim"], defaults["step"]


@callback(
    Output("storage-main", "data"),
    [
        Input("select-input-task", "value"),
        Input("select-input-trainer", "value"),
        Input("numeric-input-hidden", "value"),
        Input("numeric-input-step", "value"),
        Input("numeric-input-seed", "value"),
    ],
    State("storage-main", "data"),
)
def on_preference_changed(
    task: str,
    trainer: str,
    hidden_dim: int,
    step: float,
    seed: int,
    data: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Updates the data dict with new values from the preferences.

    Args:
        task: identify or envelope.
        trainer: One of the trainer keys.
        hidden_dim: Number of hidden units from the user's input.
        step: SG-ELM step size.
        seed: Seed of the hidden layer.
        data: The data dict to update. If None, creates a new dict.

    Returns:
        The updated data dict.
    """
    data = data or {}
    data["task"] = task
    data["trainer"] = trainer
    data["hidden_dim"] = max(min(hidden_dim, 200), 1) if hidden_dim is not None else None
    data["step"] = step
    data["seed"] = max(min(seed, 999), 0) if seed is not None else None

    return data


content = html.Div(
    [
        dash.page_container,
    ],
    className="content",
    id="page-content",
)


app.layout = html.Div([sidebar, content])


if __name__ == "__main__":
    app.run(host="0.0.0.0", debug=False)
