"""Hardware-free humanoid robot control stack.

Subsystems: fused-angle orientation math, complementary-filter attitude
estimation, a 20-DOF kinematic model with three gait pose spaces, full-body
inverse dynamics over simulated proportional servos, a CPG walking engine
with balance feedback, a keyframe motion player, a register-level servo bus,
wide-angle camera geometry, and a deterministic control-loop runtime with an
HTTP/WebSocket service for the trajectory editor.
"""

__version__ = "0.1.0"
