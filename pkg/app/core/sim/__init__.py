"""Flow simulator: topology, TCP sender, trace output and policy replay."""
