//! Edge-AI layer: the V2X channel that delays and drops detection frames on
//! their way to the ego vehicle, and late fusion of the frames that arrive.

mod channel;
mod fusion;

pub use channel::{
    Channel, ChannelConfig, ChannelError, ChannelEvent, ChannelEventKind, ChannelStats,
    InFlightFrame, LatencyModel, DELIVERY_TOLERANCE,
};
pub use fusion::{fuse, oriented_iou, FusionConfig};
