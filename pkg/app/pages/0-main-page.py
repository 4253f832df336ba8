import dash
from dash import html

dash.register_page(__name__, name="Home", path="/")

layout = html.Div(
    [
        html.H1("Streaming Extreme Learning Machines"),
        html.Div(
            "Pick a task and trainer in the sidebar, then stream the synthetic plant "
            "through the learner on the Stream Training page. Prediction tables "
            "written by the command line can be inspected on the Predictions page."
        ),
    ]
)
