//! Sequence classification: the LSTM classifier and the order-blind
//! random-forest baseline it is compared against.

pub mod forest;
pub mod lstm;

pub use forest::{
    train_forest, DecisionTree, ForestConfig, ForestModel, ForestTrainOutput, Node,
};
pub use lstm::{
    cross_entropy, lstm_backward, lstm_forward, lstm_predict, train_lstm, ForwardCache,
    LstmModel, LstmTrainConfig, LstmTrainOutput, SequenceSample,
};
