//! Synthetic scene generator for demos and verification: plants solid
//! orange-hue squares (one per species band) and optional disease patches at
//! known coordinates, so the planted layout doubles as ground truth.

use image::RgbImage;

use crate::backends::{color_for_hue, DISEASE_HUE_BANDS, SPECIES_HUE_CENTERS};
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy)]
pub struct PlantedOrange {
    pub x: u32,
    pub y: u32,
    pub size: u32,
    /// Index into the species label set; fixes the square's hue band.
    pub species: usize,
    /// Disease class id (1-based) plus patch size, painted centered.
    pub disease: Option<(usize, u32)>,
}

impl PlantedOrange {
    pub fn bbox(&self) -> BBox {
        BBox::new(
            self.x as f64,
            self.y as f64,
            (self.x + self.size) as f64,
            (self.y + self.size) as f64,
        )
    }
}

#[derive(Debug, Clone)]
pub struct PlantedScene {
    pub width: u32,
    pub height: u32,
    pub oranges: Vec<PlantedOrange>,
}

impl PlantedScene {
    /// The standard three-orange fixture: disjoint squares in distinct
    /// species bands, the middle one carrying a disease patch.
    pub fn three_oranges() -> Self {
        Self {
            width: 640,
            height: 640,
            oranges: vec![
                PlantedOrange { x: 40, y: 40, size: 120, species: 0, disease: None },
                PlantedOrange { x: 260, y: 180, size: 150, species: 2, disease: Some((2, 30)) },
                PlantedOrange { x: 470, y: 420, size: 100, species: 4, disease: None },
            ],
        }
    }

    pub fn render(&self) -> RgbImage {
        let mut img = RgbImage::new(self.width, self.height);
        for orange in &self.oranges {
            let color = color_for_hue(SPECIES_HUE_CENTERS[orange.species]);
            for y in orange.y..orange.y + orange.size {
                for x in orange.x..orange.x + orange.size {
                    img.put_pixel(x, y, color);
                }
            }
            if let Some((class_id, patch)) = orange.disease {
                let color = color_for_hue(DISEASE_HUE_BANDS[class_id - 1].0);
                let px = orange.x + (orange.size - patch) / 2;
                let py = orange.y + (orange.size - patch) / 2;
                for y in py..py + patch {
                    for x in px..px + patch {
                        img.put_pixel(x, y, color);
                    }
                }
            }
        }
        img
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_orange_fixture_is_disjoint_and_in_bounds() {
        let scene = PlantedScene::three_oranges();
        let img = scene.render();
        assert_eq!(img.dimensions(), (scene.width, scene.height));
        for (i, a) in scene.oranges.iter().enumerate() {
            for b in &scene.oranges[i + 1..] {
                assert_eq!(crate::geometry::iou(&a.bbox(), &b.bbox()), 0.0);
            }
        }
    }
}
