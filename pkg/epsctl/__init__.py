"""eps-norm analysis and synthesis for linear systems under bounded disturbances."""
