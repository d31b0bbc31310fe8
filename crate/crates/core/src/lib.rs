//! Vision-language-model guided web GUI exploration.
//!
//! The agent observes a page through a [`driver::Browser`], fills every empty
//! text input with model-generated text, asks the model which button each
//! filled input belongs to, and picks the next element to click with a
//! curiosity-rewarded ε-greedy bandit.
//!
//! Module map:
//!
//! - [`driver`]: browser session abstraction and the W3C WebDriver client.
//! - [`dom`]: input widget detection, context and constraint extraction,
//!   candidate elements and DOM distances.
//! - [`prompt`]: prompt assembly and answer parsing.
//! - [`annotate`]: red/blue frame visual prompts.
//! - [`model`]: language model backends (HTTP, scripted, record/replay).
//! - [`bandit`]: target element selection.
//! - [`explorer`]: the exploration loop and run directory output.
//! - [`report`]: run aggregation.
//! - [`sim`]: an in-process browser over static fixture sites, optionally
//!   served over the WebDriver wire protocol.

pub mod annotate;
pub mod bandit;
pub mod dom;
pub mod driver;
pub mod explorer;
pub mod geometry;
pub mod model;
pub mod prompt;
pub mod report;
pub mod sim;

pub use dom::ElementKey;
pub use geometry::Rect;
