# pcortest CLI
