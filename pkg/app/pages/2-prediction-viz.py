import base64
import io

import dash
import pandas as pd
import plotly.graph_objects as go
from dash import Input, Output, State, callback, dcc, html
from dash.exceptions import PreventUpdate

dash.register_page(__name__, name="Predictions")

layout = html.Div(
    [
        dcc.Upload(
            html.Div(["Drop a prediction CSV written by ", html.Code("cli.py evaluate")]),
            id="upload-predictions",
            style={
                "borderWidth": "1px",
                "borderStyle": "dashed",
                "borderRadius": "5px",
                "textAlign": "center",
                "padding": "20px",
            },
        ),
        html.Div("", id="predictions-status", style={"padding": "10px"}),
        dcc.Graph(id="fig-predictions", style={"height": "70vh", "width": "100%"}),
    ]
)


def read_upload(contents: str) -> pd.DataFrame:
    _, encoded = contents.split(",", 1)
    return pd.read_csv(io.StringIO(base64.b64decode(encoded).decode("utf-8")))


def prediction_figure(frame: pd.DataFrame) -> go.Figure:
    """Measured outputs against OSAP/MSAP predictions, or labels against scores."""
    fig = go.Figure()
    if "score" in frame:
        fig.add_scatter(x=frame["cycle"], y=frame["label"], name="Label", mode="markers")
        fig.add_scatter(x=frame["cycle"], y=frame["score"], name="Score")
        fig.add_hline(y=0, line_dash="dot")
        title = "Operating Envelope"
    else:
        for channel in ("y1", "y2"):
            fig.add_scatter(x=frame["cycle"], y=frame[channel], name=channel)
            fig.add_scatter(x=frame["cycle"], y=frame[f"{channel}_osap"], name=f"{channel} OSAP")
            fig.add_scatter(x=frame["cycle"], y=frame[f"{channel}_msap"], name=f"{channel} MSAP")
        title = "System Identification"

    fig.update_layout(
        title=title,
        template="simple_white",
        xaxis_title="Cycle",
        legend=dict(yanchor="top", y=0.99, xanchor="left", x=0.01),
    )
    return fig


@callback(
    [
        Output("fig-predictions", "figure"),
        Output("predictions-status", "children"),
    ],
    Input("upload-predictions", "contents"),
    State("upload-predictions", "filename"),
    prevent_initial_call=True,
)
def on_upload(contents, filename):
    if contents is None:
        raise PreventUpdate()
    try:
        frame = read_upload(contents)
        return prediction_figure(frame), f"{filename}: {len(frame)} cycles"
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        return go.Figure(), f"cannot read {filename}: {exc}"
