//! Fixtures shared by the benchmarks.

use lgcert::protocol::ProtocolParams;
use lgcert::qcore::QubitState;
use lgcert::reference::{PURE_STATE_TABLE, TABLE_ANGLE_UNIT};

/// Pure-state reference angles for the row labelled `lgi`.
pub fn table_params(lgi: f64) -> ProtocolParams {
    let row = PURE_STATE_TABLE
        .iter()
        .find(|r| (r.lgi - lgi).abs() < 1e-9)
        .expect("reference row");
    let (t1, t2) = row.angles(TABLE_ANGLE_UNIT);
    ProtocolParams::new(QubitState::protocol_pure(), t1, t2)
}
