import logging
from typing import Any, Dict

import dash
import dash_bootstrap_components as dbc
import numpy as np
import plotly.graph_objects as go
from dash import Input, Output, State, callback, dcc, html
from dash.exceptions import PreventUpdate

from utils.config import RunConfig
from utils.errors import ElmStreamError, InvalidArgumentError
from utils.instructor import Instructor, InstructorPool
from utils.validation import data_is_valid

dash.register_page(__name__, name="Stream Training")

logger = logging.getLogger(__name__)

# the session store only keeps the run id
_runs = InstructorPool(max_runs=8)


def run_config(main_data: Dict[str, Any], page_data: Dict[str, Any]) -> RunConfig:
    return RunConfig(
        task=main_data["task"],
        trainer=main_data["trainer"],
        hidden_dim=main_data["hidden_dim"],
        step=main_data["step"],
        seed=main_data["seed"],
        scale=page_data["scale"],
        init_size=page_data["init_size"],
        record_timing=False,
    )


layout = html.Div(
    [
        dcc.Store(id="storage-stream-training-viz", storage_type="session"),
        dcc.Store(id="storage-stream-training-proc", storage_type="session"),
        dcc.Interval(
            id="interval-stream-training",
            interval=1 * 1000,  # in milliseconds
            n_intervals=0,
        ),
        html.Div(
            [
                dbc.Row(
                    [
                        dbc.Col(dbc.Label("Data Scale")),
                        dbc.Col(
                            dcc.Slider(
                                0.05,
                                1.0,
                                0.05,
                                value=0.1,
                                id="slider-data-scale",
                            ),
                        ),
                    ],
                ),
                dbc.Row(
                    [
                        dbc.Col(dbc.Label("Initialisation Samples")),
                        dbc.Col(
                            dbc.Input(
                                type="number",
                                min=10,
                                max=2000,
                                step=10,
                                value=800,
                                id="numeric-input-init-size",
                            ),
                        ),
                        dbc.Col(dbc.Label("Samples per Tick")),
                        dbc.Col(
                            dbc.Input(
                                type="number",
                                min=1,
                                max=2000,
                                step=1,
                                value=200,
                                id="numeric-input-chunk",
                            ),
                        ),
                        dbc.Col(
                            dbc.Button(
                                "Start Training",
                                id="stream-training-button",
                                disabled=True,
                            ),
                        ),
                    ],
                    style={"padding": "15px"},
                ),
                html.Div("", id="stream-training-status"),
            ],
            className="settingsRow",
        ),
        html.Div(
            [
                dcc.Graph(
                    id="fig-stream-norm",
                    style={"display": "inline-block", "height": "40vh", "width": "49%"},
                ),
                dcc.Graph(
                    id="fig-stream-error",
                    style={"display": "inline-block", "height": "40vh", "width": "49%"},
                ),
            ],
        ),
    ]
)


@callback(
    Output("storage-stream-training-viz", "data"),
    [
        Input("slider-data-scale", "value"),
        Input("numeric-input-init-size", "value"),
        Input("numeric-input-chunk", "value"),
    ],
)
def on_preference_changed(scale, init_size, chunk):
    return dict(scale=scale, init_size=init_size, chunk=chunk)


@callback(
    Output("stream-training-button", "disabled", allow_duplicate=True),
    [
        Input("storage-main", "modified_timestamp"),
        Input("storage-stream-training-viz", "modified_timestamp"),
    ],
    State("storage-main", "data"),
    State("storage-stream-training-viz", "data"),
    prevent_initial_call=True,
)
def update_page_data(_, __, main_data, page_data):
    return not data_is_valid(main_data, page_data)


@callback(
    [
        Output("storage-stream-training-proc", "data", allow_duplicate=True),
        Output("stream-training-button", "disabled", allow_duplicate=True),
        Output("stream-training-status", "children", allow_duplicate=True),
    ],
    Input("stream-training-button", "n_clicks"),
    State("storage-main", "data"),
    State("storage-stream-training-viz", "data"),
    prevent_initial_call=True,
)
def trigger_training(_, main_data, page_data):
    try:
        run_id = _runs.start(Instructor.from_config(run_config(main_data, page_data), cache=True))
        with _runs.hold(run_id) as instructor:
            instructor.initialize()
            page_log = {
                "run_id": run_id,
                "running": True,
                "position": [instructor.position],
                "weight_norm": [instructor.monitor.weight_norms[-1]],
                "error_norm": [],
            }
            status = f"initialised on {instructor.init_size} samples"
    except ElmStreamError as exc:
        return None, False, f"error: {exc}"
    return page_log, True, status


@callback(
    [
        Output("storage-stream-training-proc", "data"),
        Output("stream-training-button", "disabled"),
        Output("stream-training-status", "children"),
    ],
    Input("interval-stream-training", "n_intervals"),
    [
        State("storage-stream-training-proc", "data"),
        State("storage-stream-training-viz", "data"),
        State("storage-main", "data"),
    ],
    prevent_initial_call=True,
)
def training(_, page_log, page_data, main_data):
    if page_log is None or not page_log["running"]:
        raise PreventUpdate()

    try:
        with _runs.hold(page_log.get("run_id", "")) as instructor:
            return advance(instructor, page_log, page_data["chunk"])
    except InvalidArgumentError:
        page_log["running"] = False
        return page_log, False, "training run expired, start again"


def advance(instructor: Instructor, page_log: Dict[str, Any], chunk: int):
    before = len(instructor.monitor.error_norms)
    consumed = instructor.step(chunk)

    if consumed > 0:
        page_log["position"].append(instructor.position)
        page_log["weight_norm"].append(instructor.monitor.weight_norms[-1])
        chunk_errors = instructor.monitor.error_norms[before:]
        page_log["error_norm"].append(float(np.sqrt(np.mean(np.square(chunk_errors)))))

    if instructor.finished:
        page_log["running"] = False
        report = instructor.report()
        status = ", ".join(f"{k}={v}" for k, v in report.items() if k != "task")
        return page_log, False, status

    return page_log, True, f"{instructor.position} / {len(instructor.dataset)} samples"


@callback(
    Output("fig-stream-norm", "figure"),
    Input("storage-stream-training-proc", "modified_timestamp"),
    State("storage-stream-training-proc", "data"),
    prevent_initial_call=True,
)
def update_norm(_, page_log):
    fig_norm = go.Figure()
    if page_log is not None and len(page_log["weight_norm"]) > 0:
        fig_norm.add_scatter(x=page_log["position"], y=page_log["weight_norm"])

    fig_norm.update_layout(
        title="Output Weight Norm",
        template="simple_white",
        xaxis_title="Sample",
        yaxis_title="||W||_F",
        autosize=False,
    )
    return fig_norm


@callback(
    Output("fig-stream-error", "figure"),
    Input("storage-stream-training-proc", "modified_timestamp"),
    State("storage-stream-training-proc", "data"),
    prevent_initial_call=True,
)
def update_error(_, page_log):
    fig_error = go.Figure()
    if page_log is not None and len(page_log["error_norm"]) > 0:
        fig_error.add_scatter(x=page_log["position"][1:], y=page_log["error_norm"])

    fig_error.update_layout(
        title="A-priori Error (RMS per tick)",
        template="simple_white",
        xaxis_title="Sample",
        yaxis_title="||e||",
        autosize=False,
    )
    return fig_error
