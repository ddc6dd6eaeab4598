//! JSON shapes for exact numbers: integers are plain JSON numbers when they
//! fit in an `i64` and decimal strings otherwise; rationals are `{num, den}`.
//! Both forms are accepted on input.

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::numkernel::Rational;

#[derive(Serialize, Deserialize)]
struct Flex(#[serde(with = "bigint")] BigInt);

pub mod bigint {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        match x.to_i64() {
            Some(v) => s.serialize_i64(v),
            None => s.serialize_str(&x.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = BigInt;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an integer or a decimal string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigInt, E> {
                Ok(v.into())
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigInt, E> {
                Ok(v.into())
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<BigInt, E> {
                v.parse().map_err(|_| E::custom(format!("bad integer {v:?}")))
            }
        }
        d.deserialize_any(V)
    }
}

pub mod bigint_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|x| Flex(x.clone())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Ok(Vec::<Flex>::deserialize(d)?.into_iter().map(|f| f.0).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct Frac {
    #[serde(with = "bigint")]
    num: BigInt,
    #[serde(with = "bigint")]
    den: BigInt,
}

pub mod rational {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        Frac { num: x.numer().clone(), den: x.denom().clone() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let f = Frac::deserialize(d)?;
        if f.den == BigInt::from(0) {
            return Err(de::Error::custom("zero denominator"));
        }
        Ok(Rational::new(f.num, f.den))
    }
}

pub mod rational_vec {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct R(#[serde(with = "rational")] Rational);

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|x| R(x.clone())))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Ok(Vec::<R>::deserialize(d)?.into_iter().map(|r| r.0).collect())
    }
}
