//! Role arguments such as `hard:g1`. Goals are numbered from 1 on the command
//! line and from 0 everywhere else.

use negotiate_core::{GoalAssignment, HumanSide, RobotRole};

fn parse_goal(s: &str) -> Result<usize, String> {
    let n: usize =
        s.strip_prefix('g').and_then(|d| d.parse().ok()).ok_or_else(|| format!("goal must look like g1, got '{s}'"))?;
    if n == 0 {
        return Err("goals are numbered from g1".into());
    }
    Ok(n - 1)
}

fn split(s: &str) -> Result<(&str, Option<usize>), String> {
    match s.split_once(':') {
        Some((kind, goal)) => Ok((kind, Some(parse_goal(goal)?))),
        None => Ok((s, None)),
    }
}

pub fn parse_robot(s: &str) -> Result<RobotRole, String> {
    match split(s)? {
        ("follower", None) => Ok(RobotRole::Follower),
        ("kcg", Some(g)) => Ok(RobotRole::Kcg(g)),
        ("hard", Some(g)) => Ok(RobotRole::Hard(g)),
        ("soft", Some(g)) => Ok(RobotRole::Soft(g)),
        _ => Err(format!("expected follower, kcg:gN, hard:gN or soft:gN, got '{s}'")),
    }
}

pub fn parse_human(s: &str) -> Result<HumanSide, String> {
    let a = match split(s)? {
        ("follower", None) => GoalAssignment::follower(),
        ("hard", Some(g)) => GoalAssignment::hard(g),
        ("soft", Some(g)) => GoalAssignment::soft(g),
        _ => return Err(format!("expected follower, hard:gN or soft:gN, got '{s}'")),
    };
    Ok(HumanSide::Scripted(a))
}

pub fn goal_name(index: usize) -> String {
    format!("g{}", index + 1)
}
