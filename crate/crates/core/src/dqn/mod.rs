//! Deep Q-learning: value network, replay buffer, double-Q agent and
//! checkpoints.

pub mod agent;
pub mod checkpoint;
pub mod network;
pub mod replay;

pub use agent::{act_epsilon_greedy, argmax, compute_target, epsilon_at, AgentConfig, DqnAgent, OptimizerKind, QValues};
pub use network::{Gradients, Layer, QNetwork};
pub use replay::ReplayBuffer;
