"""Protocol state machines instrumented with linearization points."""
