use std::collections::{HashMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Row counts of the canonical Northwind tables at scale 1.
pub const BASE_CUSTOMERS: usize = 91;
pub const BASE_ORDERS: usize = 830;
pub const BASE_ORDER_DETAILS: usize = 2155;
pub const BASE_PRODUCTS: usize = 77;
pub const BASE_SUPPLIERS: usize = 29;

const FIRST_ORDER_ID: u32 = 10248;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: String,
    pub company_name: String,
    pub city: String,
    pub country: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: u32,
    pub customer_id: String,
    /// Days since 1996-07-04.
    pub order_day: u32,
    pub freight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderDetail {
    pub id: u32,
    pub order_id: u32,
    pub product_id: u32,
    pub unit_price: f64,
    pub quantity: u32,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub id: u32,
    pub name: String,
    pub supplier_id: u32,
    pub unit_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supplier {
    pub id: u32,
    pub company_name: String,
    pub country: String,
}

/// Seeded stand-in for the Northwind sample database.
///
/// Order details are stored sorted by order id; primary keys of details,
/// products and suppliers are dense from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalFixture {
    pub customers: Vec<Customer>,
    pub orders: Vec<Order>,
    pub order_details: Vec<OrderDetail>,
    pub products: Vec<Product>,
    pub suppliers: Vec<Supplier>,
}

const COUNTRIES: [&str; 12] = [
    "Germany", "Mexico", "UK", "Sweden", "France", "Spain", "Canada", "Argentina", "Brazil",
    "USA", "Italy", "Portugal",
];
const CITIES: [&str; 12] = [
    "Berlin", "México D.F.", "London", "Luleå", "Strasbourg", "Madrid", "Tsawassen",
    "Buenos Aires", "São Paulo", "Portland", "Bergamo", "Lisboa",
];
const WORDS: [&str; 16] = [
    "Alfreds", "Blauer", "Chop", "Du", "Ernst", "Folk", "Galería", "Hungry", "Island",
    "Königlich", "Lazy", "Maison", "North", "Océano", "Piccolo", "Queen",
];

fn customer_code(rng: &mut ChaCha8Rng) -> String {
    (0..5).map(|_| char::from(b'A' + rng.random_range(0..26u8))).collect()
}

pub fn generate_fixture(seed: u64, scale: u32) -> RelationalFixture {
    let scale = scale.max(1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut seen = HashSet::new();
    let customers: Vec<Customer> = (0..BASE_CUSTOMERS * scale)
        .map(|i| {
            let mut id = customer_code(&mut rng);
            while !seen.insert(id.clone()) {
                id = customer_code(&mut rng);
            }
            let c = rng.random_range(0..COUNTRIES.len());
            Customer {
                id,
                company_name: format!("{} {} {}", WORDS.choose(&mut rng).unwrap(), WORDS.choose(&mut rng).unwrap(), i),
                city: CITIES[c].to_string(),
                country: COUNTRIES[c].to_string(),
            }
        })
        .collect();

    let suppliers: Vec<Supplier> = (0..BASE_SUPPLIERS * scale)
        .map(|i| Supplier {
            id: i as u32 + 1,
            company_name: format!("{} Supply {}", WORDS.choose(&mut rng).unwrap(), i + 1),
            country: COUNTRIES.choose(&mut rng).unwrap().to_string(),
        })
        .collect();

    let products: Vec<Product> = (0..BASE_PRODUCTS * scale)
        .map(|i| Product {
            id: i as u32 + 1,
            name: format!("{} product {}", WORDS.choose(&mut rng).unwrap(), i + 1),
            supplier_id: rng.random_range(1..=suppliers.len() as u32),
            unit_price: (rng.random_range(250..26_350) as f64) / 100.0,
        })
        .collect();

    let n_orders = BASE_ORDERS * scale;
    let orders: Vec<Order> = (0..n_orders)
        .map(|i| Order {
            id: FIRST_ORDER_ID + i as u32,
            customer_id: customers.choose(&mut rng).unwrap().id.clone(),
            order_day: (i * 670 / n_orders) as u32,
            freight: (rng.random_range(2..100_000) as f64) / 100.0,
        })
        .collect();

    // every order gets one line, the rest are spread at random
    let mut lines = vec![1usize; n_orders];
    for _ in 0..(BASE_ORDER_DETAILS - BASE_ORDERS) * scale {
        lines[rng.random_range(0..n_orders)] += 1;
    }
    let mut order_details = Vec::with_capacity(BASE_ORDER_DETAILS * scale);
    for (order, &count) in orders.iter().zip(&lines) {
        for _ in 0..count {
            let product = products.choose(&mut rng).unwrap();
            order_details.push(OrderDetail {
                id: order_details.len() as u32 + 1,
                order_id: order.id,
                product_id: product.id,
                unit_price: product.unit_price,
                quantity: rng.random_range(1..=120),
                discount: [0.0, 0.05, 0.1, 0.15, 0.2, 0.25][rng.random_range(0..6)],
            });
        }
    }

    RelationalFixture { customers, orders, order_details, products, suppliers }
}

impl RelationalFixture {
    /// SHA-256 over the canonical JSON encoding of all tables.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("fixture tables serialise");
        hex(&Sha256::digest(&bytes))
    }

    /// Every dangling foreign key, as human-readable descriptions.
    pub fn integrity_violations(&self) -> Vec<String> {
        let customers: HashSet<&str> = self.customers.iter().map(|c| c.id.as_str()).collect();
        let orders: HashSet<u32> = self.orders.iter().map(|o| o.id).collect();
        let products: HashMap<u32, &Product> = self.products.iter().map(|p| (p.id, p)).collect();
        let suppliers: HashSet<u32> = self.suppliers.iter().map(|s| s.id).collect();
        let mut bad = Vec::new();
        for o in &self.orders {
            if !customers.contains(o.customer_id.as_str()) {
                bad.push(format!("order {} → customer {}", o.id, o.customer_id));
            }
        }
        for d in &self.order_details {
            if !orders.contains(&d.order_id) {
                bad.push(format!("detail {} → order {}", d.id, d.order_id));
            }
            if !products.contains_key(&d.product_id) {
                bad.push(format!("detail {} → product {}", d.id, d.product_id));
            }
        }
        for p in &self.products {
            if !suppliers.contains(&p.supplier_id) {
                bad.push(format!("product {} → supplier {}", p.id, p.supplier_id));
            }
        }
        bad
    }

    pub fn detail(&self, id: u32) -> Option<&OrderDetail> {
        dense(&self.order_details, id).filter(|d| d.id == id)
    }

    pub fn product(&self, id: u32) -> Option<&Product> {
        dense(&self.products, id).filter(|p| p.id == id)
    }

    pub fn supplier(&self, id: u32) -> Option<&Supplier> {
        dense(&self.suppliers, id).filter(|s| s.id == id)
    }
}

fn dense<T>(rows: &[T], id: u32) -> Option<&T> {
    (id as usize).checked_sub(1).and_then(|i| rows.get(i))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
