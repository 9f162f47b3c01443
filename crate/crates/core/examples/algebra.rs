//! Tree-tuple algebra on two small XML collections: source, restrict, join,
//! nest, and reconstruct into nested documents.

use xfed::xalgebra::{
    path, x_join, x_nest, x_reconstruct, x_restrict, x_source, Attr, CmpOp, JoinAlgo, Predicate, ReconstructTemplate, TemplateNode,
};
use xfed::value::Value;
use xfed::xml::{documents, parse_events, XmlEvent};

const NATIONS: &str = "<nation><nationkey>1</nationkey><name>FRANCE</name></nation>\
                       <nation><nationkey>2</nationkey><name>PERU</name></nation>";
const SUPPLIERS: &str = "<supplier><name>S1</name><nationkey>1</nationkey><acctbal>120.50</acctbal></supplier>\
                         <supplier><name>S2</name><nationkey>2</nationkey><acctbal>-4.00</acctbal></supplier>\
                         <supplier><name>S3</name><nationkey>1</nationkey><acctbal>990.10</acctbal></supplier>";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (nkey, nname) = (Attr::qualified("n", path("nation/nationkey")), Attr::qualified("n", path("nation/name")));
    let (skey, sname, sbal) =
        (Attr::qualified("s", path("supplier/nationkey")), Attr::qualified("s", path("supplier/name")), Attr::qualified("s", path("supplier/acctbal")));
    let guide = |attrs: &[&Attr]| attrs.iter().map(|a| a.path.clone()).collect::<Vec<_>>();

    let nations = x_source(parse_events(NATIONS)?.into_iter(), guide(&[&nkey, &nname]), vec![nkey.clone(), nname.clone()])?;
    let suppliers =
        x_source(parse_events(SUPPLIERS)?.into_iter(), guide(&[&skey, &sname, &sbal]), vec![skey.clone(), sname.clone(), sbal.clone()])?;
    let solvent = x_restrict(suppliers, &Predicate::cmp(sbal.clone(), CmpOp::Gt, Value::infer("0")))?;

    let joined = x_join(nations, solvent, &Predicate::cmp_attr(nkey.clone(), CmpOp::Eq, skey), JoinAlgo::SortMerge)?;
    let nested = x_nest(joined, &[nkey, nname.clone()])?;

    let tpl = ReconstructTemplate::new(vec![TemplateNode::element(
        "nation",
        vec![
            TemplateNode::Placeholder(nname),
            TemplateNode::element("suppliers", vec![TemplateNode::Placeholder(sname)]),
        ],
    )]);
    println!("template: {tpl}");
    let events: Vec<XmlEvent> = x_reconstruct(nested, &tpl)?.collect();
    for doc in documents(&events)? {
        println!("{doc}");
    }
    Ok(())
}
