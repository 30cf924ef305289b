// Serialize an observation group, then read it back with the fast parser:
// machine id at its template offset, then the readings one at a time.

use skipstage::wire::{
    parse_group_reference, parse_header, parse_machine_id_with, parse_next_reading,
    serialize_group, ByteTouches,
};
use skipstage::ObservationGroup;

fn main() {
    let group = ObservationGroup {
        group_id: 123_456,
        machine_id: 59,
        timestamp: 1_000,
        readings: vec![(0, 1.5), (3, -2.25), (7, 6.02e23)],
    };
    let message = serialize_group(&group);
    print!("{}", String::from_utf8_lossy(&message));

    let mut touches = ByteTouches::default();
    let machine = parse_machine_id_with(&message, &mut touches).expect("well-formed");
    println!("machine {machine} after inspecting {} of {} bytes", touches.bytes, message.len());

    let header = parse_header(&message).expect("well-formed");
    let mut cursor = header.cursor;
    while let Some((property, value)) = parse_next_reading(&message, &mut cursor).expect("well-formed") {
        println!("  property {property} = {value} (cursor at byte {})", cursor.offset());
    }
    assert_eq!(parse_group_reference(&message).expect("well-formed"), group);
}
