//! Comparison models: a single-layer temporal convolution and depth-limited
//! decision trees over a smoothed feature bank.

mod bank;
mod conv;
mod tree;

pub use bank::{bank_rows, build_feature_bank, BankValues, BANK_ORDERS, BANK_SIGMAS};
pub use conv::{conv_fit, conv_forward, conv_from_program, ConvModel};
pub use tree::{tree_fit, tree_predict, TreeError, TreeModel, TreeNode};
