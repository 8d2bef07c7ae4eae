//! `RWPL` policy files.
//!
//! ```text
//! "RWPL" | version u16 | algorithm u8 (0 = DDPG, 1 = TD3)
//! | state tag u8 | state parameter u16 | width u16 | height u16
//! | RWNN actor | RWNN critic_1 [| RWNN critic_2]
//! | RWNN actor_target | RWNN critic_target_1 [| RWNN critic_target_2]
//! ```
//!
//! The state parameter is `k` for PCA states, `n` for reward windows and 0
//! for pixels. Optimizer state is not stored.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, WriteBytesExt};

use super::{AgentParams, Algorithm};
use crate::binio::*;
use crate::error::Result;
use crate::nn::Network;
use crate::state::StateSpec;

pub const MAGIC: [u8; 4] = *b"RWPL";
pub const VERSION: u16 = 1;

impl AgentParams {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        self.validate()?;
        w.write_all(&MAGIC)?;
        w.write_u16::<LittleEndian>(VERSION)?;
        w.write_u8(self.algorithm.tag())?;
        self.spec.write_to(w)?;
        self.actor.write_to(w)?;
        for c in &self.critics {
            c.write_to(w)?;
        }
        self.actor_target.write_to(w)?;
        for c in &self.critic_targets {
            c.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        expect_version(r, VERSION)?;
        let algorithm = Algorithm::from_tag(read_u8(r, "algorithm tag")?)?;
        let spec = StateSpec::read_from(r)?;
        let n = algorithm.critic_count();
        let actor = Network::read_from(r)?;
        let critics = (0..n).map(|_| Network::read_from(r)).collect::<Result<Vec<_>>>()?;
        let actor_target = Network::read_from(r)?;
        let critic_targets = (0..n).map(|_| Network::read_from(r)).collect::<Result<Vec<_>>>()?;
        expect_eof(r)?;
        let params = Self { algorithm, spec, actor, critics, actor_target, critic_targets };
        params.validate()?;
        Ok(params)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::fs::read(path)?.as_slice())
    }
}
