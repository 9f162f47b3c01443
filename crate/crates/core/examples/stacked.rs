//! Mediators as sources of other mediators: an inner mediator over ORDERS,
//! served over TCP and queried by an outer one.

use std::sync::Arc;

use xfed::adapters::{TabularAdapter, TcpAdapter};
use xfed::bench::{generate, orders_query, DatasetSpec};
use xfed::mediator::{Mediator, MediatorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    generate(&DatasetSpec::new(0.1, 3)).write(dir.path())?;

    let inner = Arc::new(Mediator::new("INNER", MediatorConfig::default()));
    inner.register(Arc::new(TabularAdapter::new("A3", dir.path().join("A3"))))?;
    let server = inner.clone().serve("127.0.0.1:0", None)?;
    println!("inner mediator listening on {}", server.addr());

    let outer = Mediator::new("OUTER", MediatorConfig::default());
    outer.register(Arc::new(TcpAdapter::new("INNER", server.addr().to_string())))?;
    let q = orders_query(5);
    let plan = outer.decompose(&q, xfed::decomposer::Output::Documents)?;
    print!("{}", plan.plan_text());
    let via_tcp = outer.run(&q)?;
    let direct = inner.run(&q)?;
    for doc in &via_tcp.documents {
        println!("{doc}");
    }
    println!("same answer as the inner mediator: {}", via_tcp.documents == direct.documents);
    Ok(())
}
