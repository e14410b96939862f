//! Static schema for the supported subset of the XML model language.

use std::fmt;

/// Identifier namespaces. Names are unique per (model, namespace).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Namespace {
    Body,
    Geom,
    Site,
    Joint,
    Light,
    Camera,
    Actuator,
    Sensor,
    Texture,
    Material,
    Default,
}

impl Namespace {
    pub const ALL: [Namespace; 11] = [
        Namespace::Body,
        Namespace::Geom,
        Namespace::Site,
        Namespace::Joint,
        Namespace::Light,
        Namespace::Camera,
        Namespace::Actuator,
        Namespace::Sensor,
        Namespace::Texture,
        Namespace::Material,
        Namespace::Default,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Namespace::Body => "body",
            Namespace::Geom => "geom",
            Namespace::Site => "site",
            Namespace::Joint => "joint",
            Namespace::Light => "light",
            Namespace::Camera => "camera",
            Namespace::Actuator => "actuator",
            Namespace::Sensor => "sensor",
            Namespace::Texture => "texture",
            Namespace::Material => "material",
            Namespace::Default => "default",
        }
    }

    pub fn parse(s: &str) -> Option<Namespace> {
        Namespace::ALL.iter().copied().find(|ns| ns.as_str() == s)
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Namespace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Namespace::parse(s).ok_or_else(|| format!("unknown namespace '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttrKind {
    /// Identifier within the element's namespace.
    Name,
    /// Free text.
    Text,
    Keyword(&'static [&'static str]),
    Bool,
    Int,
    Number,
    /// Fixed-length numeric array.
    Array(usize),
    /// Numeric array whose length may vary within `min..=max`.
    VarArray(usize, usize),
    /// Reference to an element of the given namespace.
    Ref(Namespace),
    /// Reference to a default class.
    ClassRef,
}

impl AttrKind {
    pub fn is_numeric(self) -> bool {
        matches!(
            self,
            AttrKind::Int | AttrKind::Number | AttrKind::Array(_) | AttrKind::VarArray(..)
        )
    }
}

#[derive(Debug)]
pub struct AttrSpec {
    pub name: &'static str,
    pub kind: AttrKind,
    /// Expressed in the compiler's angle unit (converted when models with
    /// different units are composed). `HingeAngle` only applies to hinge joints.
    pub angle: AngleAttr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleAttr {
    No,
    Always,
    HingeAngle,
}

#[derive(Debug)]
pub struct TagSpec {
    pub tag: &'static str,
    pub namespace: Option<Namespace>,
    pub attrs: &'static [AttrSpec],
    pub children: &'static [&'static str],
}

impl TagSpec {
    pub fn attr(&self, name: &str) -> Option<&'static AttrSpec> {
        self.attrs.iter().find(|a| a.name == name)
    }

    pub fn attr_index(&self, name: &str) -> usize {
        self.attrs
            .iter()
            .position(|a| a.name == name)
            .unwrap_or(usize::MAX)
    }

    pub fn allows_child(&self, tag: &str) -> bool {
        self.children.contains(&tag)
    }
}

const fn a(name: &'static str, kind: AttrKind) -> AttrSpec {
    AttrSpec {
        name,
        kind,
        angle: AngleAttr::No,
    }
}

const fn ang(name: &'static str, kind: AttrKind) -> AttrSpec {
    AttrSpec {
        name,
        kind,
        angle: AngleAttr::Always,
    }
}

const fn hinge(name: &'static str, kind: AttrKind) -> AttrSpec {
    AttrSpec {
        name,
        kind,
        angle: AngleAttr::HingeAngle,
    }
}

use AttrKind::*;

pub const GEOM_TYPES: &[&str] = &["plane", "sphere", "capsule", "cylinder", "box", "ellipsoid"];
pub const JOINT_TYPES: &[&str] = &["hinge", "slide"];
const SITE_TYPES: &[&str] = &["sphere", "capsule", "cylinder", "box", "ellipsoid"];

const MUJOCO_ATTRS: &[AttrSpec] = &[a("model", Text)];
const COMPILER_ATTRS: &[AttrSpec] = &[a("angle", Keyword(&["degree", "radian"]))];
const OPTION_ATTRS: &[AttrSpec] = &[
    a("timestep", Number),
    a("gravity", Array(3)),
    a("density", Number),
    a("integrator", Keyword(&["Euler", "RK4"])),
];
const DEFAULT_ATTRS: &[AttrSpec] = &[a("class", Name)];
const TEXTURE_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("type", Keyword(&["2d", "cube", "skybox"])),
    a("builtin", Keyword(&["none", "checker", "flat", "gradient"])),
    a("width", Int),
    a("height", Int),
    a("rgb1", Array(3)),
    a("rgb2", Array(3)),
];
const MATERIAL_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("class", ClassRef),
    a("texture", Ref(Namespace::Texture)),
    a("texrepeat", Array(2)),
    a("rgba", Array(4)),
    a("reflectance", Number),
    a("emission", Number),
    a("specular", Number),
    a("shininess", Number),
];
const BODY_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("childclass", ClassRef),
    a("pos", Array(3)),
    a("quat", Array(4)),
    ang("euler", Array(3)),
];
const GEOM_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("class", ClassRef),
    a("type", Keyword(GEOM_TYPES)),
    a("size", VarArray(1, 3)),
    a("fromto", Array(6)),
    a("pos", Array(3)),
    a("quat", Array(4)),
    ang("euler", Array(3)),
    a("rgba", Array(4)),
    a("material", Ref(Namespace::Material)),
    a("density", Number),
    a("mass", Number),
    a("drag", Number),
    a("group", Int),
];
const SITE_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("class", ClassRef),
    a("type", Keyword(SITE_TYPES)),
    a("size", VarArray(1, 3)),
    a("pos", Array(3)),
    a("quat", Array(4)),
    ang("euler", Array(3)),
    a("rgba", Array(4)),
    a("group", Int),
];
const JOINT_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("class", ClassRef),
    a("type", Keyword(JOINT_TYPES)),
    a("axis", Array(3)),
    a("pos", Array(3)),
    a("limited", Bool),
    hinge("range", Array(2)),
    a("damping", Number),
    a("stiffness", Number),
    hinge("springref", Number),
    hinge("ref", Number),
    a("armature", Number),
];
const FREEJOINT_ATTRS: &[AttrSpec] = &[a("name", Name)];
const LIGHT_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("pos", Array(3)),
    a("dir", Array(3)),
    a("diffuse", Array(3)),
    a("directional", Bool),
];
const CAMERA_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("pos", Array(3)),
    a("quat", Array(4)),
    ang("euler", Array(3)),
    a("fovy", Number),
];
const MOTOR_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("class", ClassRef),
    a("joint", Ref(Namespace::Joint)),
    a("gear", Number),
    a("ctrllimited", Bool),
    a("ctrlrange", Array(2)),
];
const POSITION_ATTRS: &[AttrSpec] = &[
    a("name", Name),
    a("class", ClassRef),
    a("joint", Ref(Namespace::Joint)),
    a("kp", Number),
    a("kv", Number),
    a("ctrllimited", Bool),
    a("ctrlrange", Array(2)),
];
const SENSOR_ATTRS: &[AttrSpec] = &[a("name", Name), a("joint", Ref(Namespace::Joint))];
const NO_ATTRS: &[AttrSpec] = &[];

const BODY_CHILDREN: &[&str] = &[
    "body",
    "geom",
    "site",
    "joint",
    "freejoint",
    "light",
    "camera",
];

pub static TAGS: &[TagSpec] = &[
    TagSpec {
        tag: "mujoco",
        namespace: None,
        attrs: MUJOCO_ATTRS,
        children: &[
            "compiler",
            "option",
            "default",
            "asset",
            "worldbody",
            "actuator",
            "sensor",
        ],
    },
    TagSpec {
        tag: "compiler",
        namespace: None,
        attrs: COMPILER_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "option",
        namespace: None,
        attrs: OPTION_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "default",
        namespace: Some(Namespace::Default),
        attrs: DEFAULT_ATTRS,
        children: &[
            "default", "joint", "geom", "site", "motor", "position", "material",
        ],
    },
    TagSpec {
        tag: "asset",
        namespace: None,
        attrs: NO_ATTRS,
        children: &["texture", "material"],
    },
    TagSpec {
        tag: "texture",
        namespace: Some(Namespace::Texture),
        attrs: TEXTURE_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "material",
        namespace: Some(Namespace::Material),
        attrs: MATERIAL_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "worldbody",
        namespace: None,
        attrs: NO_ATTRS,
        children: &["body", "geom", "site", "light", "camera"],
    },
    TagSpec {
        tag: "body",
        namespace: Some(Namespace::Body),
        attrs: BODY_ATTRS,
        children: BODY_CHILDREN,
    },
    TagSpec {
        tag: "geom",
        namespace: Some(Namespace::Geom),
        attrs: GEOM_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "site",
        namespace: Some(Namespace::Site),
        attrs: SITE_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "joint",
        namespace: Some(Namespace::Joint),
        attrs: JOINT_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "freejoint",
        namespace: Some(Namespace::Joint),
        attrs: FREEJOINT_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "light",
        namespace: Some(Namespace::Light),
        attrs: LIGHT_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "camera",
        namespace: Some(Namespace::Camera),
        attrs: CAMERA_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "actuator",
        namespace: None,
        attrs: NO_ATTRS,
        children: &["motor", "position"],
    },
    TagSpec {
        tag: "motor",
        namespace: Some(Namespace::Actuator),
        attrs: MOTOR_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "position",
        namespace: Some(Namespace::Actuator),
        attrs: POSITION_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "sensor",
        namespace: None,
        attrs: NO_ATTRS,
        children: &["jointpos", "jointvel"],
    },
    TagSpec {
        tag: "jointpos",
        namespace: Some(Namespace::Sensor),
        attrs: SENSOR_ATTRS,
        children: &[],
    },
    TagSpec {
        tag: "jointvel",
        namespace: Some(Namespace::Sensor),
        attrs: SENSOR_ATTRS,
        children: &[],
    },
];

pub fn tag_spec(tag: &str) -> Option<&'static TagSpec> {
    TAGS.iter().find(|t| t.tag == tag)
}

/// Attributes a `<default>` child may carry for the given tag: everything but
/// identity attributes.
pub fn default_attr(tag: &str, attr: &str) -> Option<&'static AttrSpec> {
    if attr == "name" || attr == "class" {
        return None;
    }
    tag_spec(tag)?.attr(attr)
}
